#include "cavity/detector.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cavity;

namespace {

const cplx I{0.0, 1.0};

Worldline free_fall(double R) { return FreeFallWorldline(SchwarzschildBackground(1.0, R)); }

// Detector held at a fixed cavity position: time = tau.
Trajectory at_rest(double x) {
    return [x](double tau) { return WorldlinePoint{tau, x, tau, 0.0}; };
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((CavitySpec{0.0}).validate(), DomainError);
    CHECK_THROWS_AS((CavitySpec{5.0, 0}).validate(), DomainError);
    CHECK_THROWS_AS((CavitySpec{5.0, 64, 0.0}).validate(), DomainError);
    CHECK_THROWS_AS((DetectorSpec{0.0, 1.0}).validate(), DomainError);
    CHECK_THROWS_AS((DetectorSpec{0.01, -1.0}).validate(), DomainError);
    CHECK(CavitySpec{5.0}.wavenumber(3) == doctest::Approx(3.0 * std::numbers::pi / 5.0));
}

TEST_CASE("mode functions") {
    const CavitySpec cav{5.0};
    CHECK(std::abs(mode_function(1, 0.0, 2.0, cav)) == 0.0);
    CHECK(std::abs(mode_function(3, 5.0, 2.0, cav)) < 1e-15);
    const double k = cav.wavenumber(1);
    CHECK(std::abs(mode_function(1, 2.5, 0.7, cav) - std::exp(I * (k * 0.7))) < 1e-15);
    CHECK(std::abs(mode_function(2, 2.5, 0.7, cav)) < 1e-15);  // node of the second mode
    CHECK_THROWS_AS(mode_function(1, -0.1, 0.0, cav), DomainError);
    CHECK_THROWS_AS(mode_function(1, 5.1, 0.0, cav), DomainError);
}

TEST_CASE("mode integrand follows its definition") {
    const CavitySpec cav{5.0};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / 5.0};
    const auto path = trajectory_of(free_fall(10.0));
    const auto f = mode_integrand(6, +1, path, cav, det);
    const auto g = mode_integrand(6, -1, path, cav, det);
    const double k = cav.wavenumber(6);
    for (double tau : {0.5, 13.0, 27.0}) {
        const WorldlinePoint p = path(tau);
        const cplx plus = std::exp(I * (det.omega * tau + k * p.time)) * std::sin(k * p.space);
        const cplx minus = std::exp(I * (-det.omega * tau + k * p.time)) * std::sin(k * p.space);
        CHECK(std::abs(f(tau) - plus) < 1e-12);
        CHECK(std::abs(g(tau) - minus) < 1e-12);
    }
}

TEST_CASE("detector at rest has a closed form mode integral") {
    const CavitySpec cav{5.0};
    const DetectorSpec det{0.01, 2.0};
    const double x = 1.3, T = 40.0;
    for (int n : {1, 6, 30}) {
        const double k = cav.wavenumber(n);
        const auto m = compute_mode_integrals(n, at_rest(x), T, cav, det, QuadratureConfig{});
        const cplx expected = std::sin(k * x) * (std::exp(I * ((det.omega + k) * T)) - 1.0) / (I * (det.omega + k));
        CHECK(std::abs(m.I_plus - expected) < 1e-11);
        REQUIRE(m.I_minus);
        const cplx expected_minus =
            std::sin(k * x) * (std::exp(I * ((k - det.omega) * T)) - 1.0) / (I * (k - det.omega));
        CHECK(std::abs(*m.I_minus - expected_minus) < 1e-11);
    }
}

TEST_CASE("I+ for the reference free fall matches a fine Simpson sum") {
    const double L = 5.0;
    const CavitySpec cav{L};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(10.0);
    const double T = transit_time(wl, L);
    const double k = cav.wavenumber(6);
    auto f = [&](double tau) {
        const WorldlinePoint p = position(wl, tau);
        return std::exp(I * (det.omega * tau + k * p.time)) * std::sin(k * p.space);
    };
    const int N = 200000;
    const double h = T / N;
    std::complex<long double> sum = 0.0L;
    for (int i = 0; i <= N; ++i) {
        const long double w = (i == 0 || i == N) ? 1.0L : (i % 2 ? 4.0L : 2.0L);
        const cplx v = f(i * h);
        sum += std::complex<long double>(w * v.real(), w * v.imag());
    }
    const cplx simpson(static_cast<double>(sum.real() * h / 3.0L), static_cast<double>(sum.imag() * h / 3.0L));
    const auto m = compute_mode_integrals(6, trajectory_of(wl), T, cav, det, QuadratureConfig{});
    CHECK(std::abs(m.I_plus - simpson) <= 1e-9 * std::abs(simpson));
}

TEST_CASE("tail estimate of a power law") {
    std::vector<double> c;
    double head = 0.0;
    for (int n = 1; n <= 256; ++n) {
        c.push_back(std::pow(n, -3.0));
        head += c.back();
    }
    double rest = 0.0;
    for (int n = 257; n < 2000000; ++n) rest += std::pow(n, -3.0);
    CHECK(relative_tail_estimate(c) == doctest::Approx(rest / head).epsilon(0.02));
    CHECK(relative_tail_estimate(std::vector<double>(16, 0.0)) == 0.0);
    std::vector<double> slow;
    for (int n = 1; n <= 64; ++n) slow.push_back(1.0 / std::sqrt(n));
    CHECK(std::isinf(relative_tail_estimate(slow)));
    CHECK(std::isinf(relative_tail_estimate(std::vector<double>{1.0, 0.5})));
}

TEST_CASE("reference transition probabilities") {
    const double L = 5.0;
    const CavitySpec cav{L};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const SchwarzschildBackground bg(1.0, 10.0);
    const Worldline sch = FreeFallWorldline(bg);
    const auto rs = transition_probability(sch, cav, det, QuadratureConfig{}, transit_time(sch, L));
    CHECK(rs.P1 == doctest::Approx(5.1146080349822701e-08).epsilon(1e-7));
    CHECK(rs.T == doctest::Approx(27.497352671637934).epsilon(1e-14));
    CHECK(rs.truncation_tail <= cav.tail_rel_tol);
    CHECK(rs.P2 == rs.P1);
    CHECK(std::isnan(rs.unitarity_residual));

    const Worldline rin = RindlerWorldline(matched_acceleration(bg, L, Anchor::entrance));
    const auto rr = transition_probability(rin, cav, det, QuadratureConfig{}, transit_time(rin, L));
    CHECK(rr.P1 == doctest::Approx(4.0437211652488377e-08).epsilon(1e-7));
    CHECK(rr.T == doctest::Approx(29.769378478056304).epsilon(1e-14));
}

TEST_CASE("P1 scales exactly with lambda squared") {
    const double L = 4.0;
    const CavitySpec cav{L, 32, 1e9, 32};
    for (const Worldline& wl : {free_fall(12.0), Worldline(RindlerWorldline(0.01))}) {
        const double T = transit_time(wl, L);
        const auto p1 = transition_probability(wl, cav, DetectorSpec{0.01, 1.5}, QuadratureConfig{}, T);
        const auto p2 = transition_probability(wl, cav, DetectorSpec{0.02, 1.5}, QuadratureConfig{}, T);
        CHECK(p2.P1 / p1.P1 == 4.0);
    }
}

TEST_CASE("counter-rotating terms are discarded by the selection rule") {
    const double L = 4.0;
    const CavitySpec cav{L, 16, 1e9, 16};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(10.0);
    const double T = transit_time(wl, L);
    ResponseOptions with;
    with.include_counter_rotating = true;
    const auto a = transition_probability(wl, cav, det, QuadratureConfig{}, T);
    const auto b = transition_probability(wl, cav, det, QuadratureConfig{}, T, with);
    CHECK(a.P1 == b.P1);
    REQUIRE(b.modes.front().I_minus);
    CHECK(std::abs(*b.modes.front().I_minus) > 0.0);
}

TEST_CASE("second-order unitarity on a moderate transit") {
    const double L = 5.0;
    const CavitySpec cav{L, 12, 1e9, 12};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(10.0);
    ResponseOptions opts;
    opts.verify_unitarity = true;
    const auto r = transition_probability(wl, cav, det, QuadratureConfig{}, transit_time(wl, L), opts);
    CHECK(r.p2_from_double_quadrature);
    CHECK(r.unitarity_residual < 1e-8);
    CHECK(r.P2 == doctest::Approx(r.P1).epsilon(1e-8));
    for (const auto& m : r.modes) REQUIRE(m.J);
}

TEST_CASE("profile matches single switch-off times") {
    const double L = 3.0;
    const CavitySpec cav{L, 32, 1e9, 32};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(10.0);
    const double T = transit_time(wl, L);
    const std::vector<double> ends{1e-9, 0.3 * T, 0.7 * T, T};
    const auto prof = transition_profile(trajectory_of(wl), cav, det, QuadratureConfig{}, ends);
    REQUIRE(prof.size() == ends.size());
    CHECK(prof.front().P1 < 1e-20);
    for (std::size_t i = 1; i < ends.size(); ++i) {
        const auto single = transition_probability(wl, cav, det, QuadratureConfig{}, ends[i]);
        CHECK(prof[i].P1 == doctest::Approx(single.P1).epsilon(1e-8));
        CHECK(prof[i].T == ends[i]);
    }
}

TEST_CASE("profile rejects bad switch-off grids") {
    const CavitySpec cav{3.0};
    const DetectorSpec det{0.01, 1.0};
    const auto path = trajectory_of(free_fall(10.0));
    CHECK_THROWS_AS(transition_profile(path, cav, det, QuadratureConfig{}, std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(transition_profile(path, cav, det, QuadratureConfig{}, std::vector<double>{2.0, 1.0}), DomainError);
    CHECK_THROWS_AS(transition_probability(free_fall(10.0), cav, det, QuadratureConfig{}, 1e3), DomainError);
}

TEST_CASE("unconverged mode sum raises truncation error with results") {
    const double L = 5.0;
    const CavitySpec cav{L, 8, 1e-9, 16};
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(10.0);
    try {
        transition_probability(wl, cav, det, QuadratureConfig{}, transit_time(wl, L));
        FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
        REQUIRE(e.results().size() == 1);
        CHECK(e.results().front().modes.size() == 16);
        CHECK(e.results().front().truncation_tail > 1e-9);
        CHECK(e.results().front().P1 > 0.0);
    }
}

TEST_CASE("probability is positive and grows with the mode count") {
    const double L = 4.0;
    const DetectorSpec det{0.01, 6.0 * std::numbers::pi / L};
    const Worldline wl = free_fall(20.0);
    const double T = transit_time(wl, L);
    const auto a = transition_probability(wl, CavitySpec{L, 16, 1e9, 16}, det, QuadratureConfig{}, T);
    const auto b = transition_probability(wl, CavitySpec{L, 32, 1e9, 32}, det, QuadratureConfig{}, T);
    CHECK(a.P1 > 0.0);
    CHECK(b.P1 > a.P1);
}

}  // TEST_SUITE

#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"

#include <doctest.h>

#include <cmath>

using namespace cavity;

namespace {

// Proper time for a radial geodesic dropped from rest at R to fall a proper
// depth L (areal radius R - f L), by RK4 on d2r/dtau2 = -m/r^2.
double rk4_transit(double m, double R, double L, double h) {
    const double f = std::sqrt(1.0 - 2.0 * m / R);
    const double target = R - f * L;
    double r = R, v = 0.0, tau = 0.0;
    auto acc = [m](double x) { return -m / (x * x); };
    while (true) {
        const double k1r = v, k1v = acc(r);
        const double k2r = v + 0.5 * h * k1v, k2v = acc(r + 0.5 * h * k1r);
        const double k3r = v + 0.5 * h * k2v, k3v = acc(r + 0.5 * h * k2r);
        const double k4r = v + h * k3v, k4v = acc(r + h * k3r);
        const double r_next = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        const double v_next = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if (r_next <= target) return tau + h * (r - target) / (r - r_next);
        r = r_next;
        v = v_next;
        tau += h;
    }
}

}  // namespace

TEST_SUITE("kinematics") {

TEST_CASE("background invariants") {
    CHECK_THROWS_AS(SchwarzschildBackground(0.0, 10.0), DomainError);
    CHECK_THROWS_AS(SchwarzschildBackground(1.0, 2.0), DomainError);
    CHECK_THROWS_AS(SchwarzschildBackground(1.0, 1.5), DomainError);
    const SchwarzschildBackground bg(1.0, 10.0);
    CHECK(bg.redshift() == doctest::Approx(std::sqrt(0.8)));
    CHECK(bg.cavity_fits(5.0));
    CHECK_FALSE(bg.cavity_fits(9.0));  // 10 - sqrt(0.8) 9 < 2
    CHECK_THROWS_AS(bg.require_cavity_fits(9.0), DomainError);
}

TEST_CASE("frame transform") {
    const SchwarzschildBackground bg(1.0, 10.0);
    const auto [rp, tp] = frame_transform(10.0, 3.0, bg);
    CHECK(rp == 0.0);
    CHECK(tp == doctest::Approx(3.0 * std::sqrt(0.8)));
    CHECK(frame_transform(bg.radius_at_depth(2.0), 0.0, bg).first == doctest::Approx(2.0));
    CHECK_THROWS_AS(frame_transform(11.0, 0.0, bg), DomainError);
}

TEST_CASE("cycloid starts at rest at the entrance") {
    const FreeFallWorldline wl(SchwarzschildBackground(1.0, 10.0));
    const WorldlinePoint p = wl.at(0.0);
    CHECK(p.space == 0.0);
    CHECK(p.time == 0.0);
    CHECK(p.lag == 0.0);
    CHECK(wl.tau_of_theta(0.0) == 0.0);
    CHECK(wl.theta_horizon() == doctest::Approx(2.0 * std::acos(std::sqrt(0.2))));
}

TEST_CASE("theta round trip") {
    const FreeFallWorldline wl(SchwarzschildBackground(1.0, 10.0));
    for (double theta : {1e-6, 1e-3, 0.1, 0.7, 1.5, 2.0}) {
        const double tau = wl.tau_of_theta(theta);
        CHECK(wl.theta_of_tau(tau) == doctest::Approx(theta).epsilon(1e-13));
        CHECK(theta_of_tau(tau, wl) == wl.theta_of_tau(tau));
    }
    CHECK_THROWS_AS(wl.theta_of_tau(-1.0), DomainError);
    CHECK_THROWS_AS(wl.theta_of_tau(1e6), DomainError);
}

TEST_CASE("areal radius follows the cycloid") {
    const SchwarzschildBackground bg(1.0, 10.0);
    const FreeFallWorldline wl(bg);
    for (double theta : {0.2, 0.9, 1.6}) {
        const WorldlinePoint p = wl.at_theta(theta);
        const double r = 10.0 * std::pow(std::cos(0.5 * theta), 2);
        CHECK(bg.radius_at_depth(p.space) == doctest::Approx(r).epsilon(1e-14));
    }
}

TEST_CASE("free fall is monotone in space and time") {
    const FreeFallWorldline wl(SchwarzschildBackground(1.0, 10.0));
    const double T = wl.transit_time(5.0);
    WorldlinePoint prev = wl.at(0.0);
    for (int i = 1; i <= 200; ++i) {
        const WorldlinePoint p = wl.at(T * i / 200.0);
        CHECK(p.space > prev.space);
        CHECK(p.time > prev.time);
        CHECK(p.lag >= prev.lag);
        prev = p;
    }
}

TEST_CASE("coordinate time rate along the geodesic") {
    const SchwarzschildBackground bg(1.0, 10.0);
    const FreeFallWorldline wl(bg);
    const double h = 1e-4;
    for (double tau : {1.0, 10.0, 25.0}) {
        const double rate = (wl.at(tau + h).time - wl.at(tau - h).time) / (2.0 * h);
        const double r = bg.radius_at_depth(wl.at(tau).space);
        CHECK(rate == doctest::Approx((1.0 - 2.0 / 10.0) / (1.0 - 2.0 / r)).epsilon(1e-8));
    }
}

TEST_CASE("lag equals the integrated excess time rate") {
    const SchwarzschildBackground bg(1.0, 10.0);
    const FreeFallWorldline wl(bg);
    QuadratureConfig cfg;
    cfg.abs_tol = 1e-16;
    cfg.rel_tol = 1e-13;
    auto excess = [&](double tau) {
        const double r = bg.radius_at_depth(wl.at(tau).space);
        return cplx(0.2 * (10.0 - r) / (r - 2.0));
    };
    for (double tau : {0.05, 1.0, 10.0, 27.0}) {
        const double expected = integrate_1d(excess, 0.0, tau, cfg).value.real();
        const WorldlinePoint p = wl.at(tau);
        CHECK(p.lag == doctest::Approx(expected).epsilon(1e-10));
        CHECK(p.lag == doctest::Approx(p.time - tau).epsilon(1e-9));
    }
}

TEST_CASE("transit time") {
    const SchwarzschildBackground bg(1.0, 10.0);
    const FreeFallWorldline wl(bg);
    const double T = wl.transit_time(5.0);
    CHECK(T == doctest::Approx(27.497353).epsilon(1e-7));
    CHECK(T == doctest::Approx(rk4_transit(1.0, 10.0, 5.0, 1e-3)).epsilon(1e-8));
    CHECK(wl.at(T).space == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(transit_time_schwarzschild(bg, 5.0) == T);
    CHECK(wl.transit_time(0.0) == 0.0);
}

TEST_CASE("newtonian limit far from the hole") {
    const double m = 1.0, R = 1e5, L = 1.0;
    const double g = m / (R * R);
    const double T = transit_time_schwarzschild(SchwarzschildBackground(m, R), L);
    CHECK(T == doctest::Approx(std::sqrt(2.0 * L / g)).epsilon(1e-4));
}

TEST_CASE("scale invariance of the free fall") {
    const double s = 3.7;
    const FreeFallWorldline a(SchwarzschildBackground(1.0, 12.0));
    const FreeFallWorldline b(SchwarzschildBackground(s, s * 12.0));
    CHECK(b.transit_time(s * 4.0) == doctest::Approx(s * a.transit_time(4.0)).epsilon(1e-13));
    const WorldlinePoint pa = a.at(9.0), pb = b.at(s * 9.0);
    CHECK(pb.space == doctest::Approx(s * pa.space).epsilon(1e-12));
    CHECK(pb.time == doctest::Approx(s * pa.time).epsilon(1e-12));
    CHECK(pb.lag == doctest::Approx(s * pa.lag).epsilon(1e-10));
}

TEST_CASE("rindler worldline") {
    const double a = 0.0111803;
    const RindlerWorldline wl(a);
    for (double tau : {0.0, 0.5, 5.0, 20.0, 300.0}) {
        const WorldlinePoint p = wl.at(tau);
        CHECK(p.space == doctest::Approx((std::cosh(a * tau) - 1.0) / a).epsilon(1e-12));
        CHECK(p.time == doctest::Approx(std::sinh(a * tau) / a).epsilon(1e-14));
        if (tau > 0.0) CHECK(p.lag == doctest::Approx(p.time - tau).epsilon(1e-8));
    }
    const double T = wl.transit_time(5.0);
    CHECK(T == doctest::Approx(std::acosh(1.0 + a * 5.0) / a).epsilon(1e-13));
    CHECK(wl.at(T).space == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(transit_time_rindler(a, 5.0) == T);
    CHECK_THROWS_AS(RindlerWorldline(0.0), DomainError);
}

TEST_CASE("rindler lag is continuous across its series switch") {
    const double a = 1.0;
    const RindlerWorldline wl(a);
    const double below = wl.at(0.1 - 1e-12).lag, above = wl.at(0.1 + 1e-12).lag;
    CHECK(above == doctest::Approx(below).epsilon(1e-9));
    CHECK(wl.at(1e-4).lag == doctest::Approx(1e-12 / 6.0).epsilon(1e-8));
}

TEST_CASE("matched acceleration") {
    const SchwarzschildBackground bg(1.0, 10.0);
    CHECK(matched_acceleration(bg, 5.0, Anchor::entrance) == doctest::Approx(1.0 / (100.0 * std::sqrt(0.8))));
    const double r_mid = bg.radius_at_depth(2.5);
    CHECK(matched_acceleration(bg, 5.0, Anchor::middle) == doctest::Approx(static_acceleration(1.0, r_mid)));
    CHECK(matched_acceleration(bg, 5.0, Anchor::middle) > matched_acceleration(bg, 5.0, Anchor::entrance));
    CHECK_THROWS_AS(static_acceleration(1.0, 2.0), DomainError);
}

TEST_CASE("anchor names") {
    CHECK(parse_anchor("entrance") == Anchor::entrance);
    CHECK(parse_anchor("middle") == Anchor::middle);
    CHECK(to_string(Anchor::middle) == "middle");
    CHECK_THROWS_AS(parse_anchor("centre"), DomainError);
}

TEST_CASE("variant dispatch") {
    const Worldline ff = FreeFallWorldline(SchwarzschildBackground(1.0, 10.0));
    const Worldline rw = RindlerWorldline(0.01);
    CHECK(position(ff, 3.0).space == std::get<FreeFallWorldline>(ff).at(3.0).space);
    CHECK(transit_time(rw, 2.0) == std::get<RindlerWorldline>(rw).transit_time(2.0));
    CHECK(freefall_position(3.0, std::get<FreeFallWorldline>(ff)).time == position(ff, 3.0).time);
    CHECK(rindler_position(3.0, std::get<RindlerWorldline>(rw)).time == position(rw, 3.0).time);
}

}  // TEST_SUITE

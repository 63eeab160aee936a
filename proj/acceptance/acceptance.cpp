// One line per acceptance criterion; exit status 1 if any fails.

#include "cavity/cli.hpp"
#include "cavity/detector.hpp"
#include "cavity/experiments.hpp"
#include "cavity/validity.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cavity;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double omega_for(double L) { return 6.0 * std::numbers::pi / L; }

Outcome unitarity() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    std::string where;
    int configs = 0;
    while (configs < 10) {
        const double R = 5.0 * std::pow(8.0, u(rng));
        const double L = 2.0 + 4.0 * u(rng);
        const int scenario = static_cast<int>(3.0 * u(rng));
        const SchwarzschildBackground bg(1.0, R);
        if (!bg.cavity_fits(L)) continue;
        ++configs;
        const Worldline wl = scenario == 0 ? Worldline(FreeFallWorldline(bg))
                                           : Worldline(RindlerWorldline(matched_acceleration(
                                                 bg, L, scenario == 1 ? Anchor::entrance : Anchor::middle)));
        const CavitySpec cav{L};
        const DetectorSpec det{0.01, omega_for(L)};
        const auto path = trajectory_of(wl);
        const double T = transit_time(wl, L);
        for (int n = 1; n <= 12; ++n) {
            const ModeIntegral m = compute_mode_integrals(n, path, T, cav, det, QuadratureConfig{}, {false, true});
            const double direct = std::norm(m.I_plus);
            const double residual = std::abs(2.0 * m.J->real() - direct) / direct;
            if (residual > worst) {
                worst = residual;
                where = fmt("R=%.3g L=%.3g %s n=%d", R, L,
                            scenario == 0 ? "schwarzschild" : (scenario == 1 ? "rindler/entrance" : "rindler/middle"),
                            n);
            }
        }
    }
    return {worst <= 1e-8, fmt("worst |2Re J - |I|^2|/|I|^2 = %.2e at %s (limit 1e-8)", worst, where.c_str())};
}

Outcome estimator_values() {
    const double a = estimator(10.0, 2.0, 1.0).ratio;
    const double b = estimator(40.0, 6.0, 1.0).ratio;
    bool below = true;
    for (double R = 40.0; R <= 1000.0; R *= 1.1) below = below && estimator(R, 6.0, 1.0).ratio < 1.03 + 1e-3;
    return {std::abs(a - 1.1475) <= 1e-3 && std::abs(b - 1.030) <= 1e-3 && below,
            fmt("estimator(10,2,1)=%.5f estimator(40,6,1)=%.5f, <=1.031 for R>=40 at L=6: %s", a, b,
                below ? "yes" : "no")};
}

// The tortoise difference in extended precision: for L << R the two r*
// values agree to many digits and their double difference would set the
// error floor of the comparison.
double tortoise_difference_ratio(double R, double L, double m) {
    using ld = long double;
    auto rstar = [m](ld r) { return r + 2.0L * m * std::log(r / (2.0L * m) - 1.0L); };
    const ld f = std::sqrt(1.0L - 2.0L * m / static_cast<ld>(R));
    return static_cast<double>((rstar(R) - rstar(static_cast<ld>(R) - f * L)) / L);
}

Outcome closed_form() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int count = 0;
    while (count < 100) {
        const double m = 0.5 + 2.0 * u(rng);
        const double R = 2.0 * m + std::pow(10.0, -1.0 + 3.0 * u(rng)) * m;
        const double L = std::pow(10.0, -3.0 + 4.0 * u(rng)) * m;
        if (!SchwarzschildBackground(m, R).cavity_fits(L)) continue;
        ++count;
        const double oracle = tortoise_difference_ratio(R, L, m);
        worst = std::max(worst, std::abs(estimator_closed_form(R, L, m) - oracle) / oracle);
    }
    return {worst <= 1e-12, fmt("worst relative difference %.2e over 100 triples (limit 1e-12)", worst)};
}

// dr/dtau = -sqrt(2m/r - 2m/R) from rest at R. The start is stationary, so
// the first instant comes from the series r = R - m tau^2 / (2 R^2).
double ode_transit(double m, double R, double L) {
    const double f = std::sqrt(1.0 - 2.0 * m / R);
    const double target = R - f * L;
    const double h = 1e-3;
    double tau = 1e-3;
    double r = R - m * tau * tau / (2.0 * R * R);
    auto rate = [&](double x) { return -std::sqrt(std::max(0.0, 2.0 * m / x - 2.0 * m / R)); };
    while (true) {
        const double k1 = rate(r), k2 = rate(r + 0.5 * h * k1), k3 = rate(r + 0.5 * h * k2), k4 = rate(r + h * k3);
        const double next = r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (next <= target) return tau + h * (r - target) / (r - next);
        r = next;
        tau += h;
    }
}

Outcome geodesic_transit() {
    const double T = transit_time_schwarzschild(SchwarzschildBackground(1.0, 10.0), 5.0);
    const double ode = ode_transit(1.0, 10.0, 5.0);
    return {std::abs(T - 27.50) <= 0.01 && std::abs(ode - 27.50) <= 0.01 && std::abs(T - ode) <= 0.01,
            fmt("closed form %.6f, ODE %.6f (target 27.50 +/- 0.01)", T, ode)};
}

std::vector<SweepRow> ratio_rows(std::vector<double> L, std::vector<double> R, std::vector<Anchor> anchors) {
    SweepSpec s;
    s.L = std::move(L);
    s.R = std::move(R);
    s.anchors = std::move(anchors);
    return run_ratio_curves(s);
}

Outcome equivalence_limit() {
    const auto rows = ratio_rows({1e-3}, {20.0, 40.0, 80.0}, {Anchor::entrance, Anchor::middle});
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.ratio - 1.0));
    return {rows.size() == 6 && worst < 1e-2, fmt("max |ratio - 1| = %.2e over R in {20,40,80}, both anchors", worst)};
}

Outcome middle_ordering() {
    const auto rows = ratio_rows({2.0, 4.0, 6.0}, geometric_grid(5.0, 100.0, 32), {Anchor::middle});
    int valid = 0, below = 0;
    double largest = 0.0;
    std::string worst;
    for (const auto& r : rows) {
        if (r.flags.horizon) continue;
        ++valid;
        if (r.ratio < 1.0) ++below;
        if (r.ratio > largest || valid == 1) {
            largest = r.ratio;
            worst = fmt("L=%g R=%.4g", r.L, r.R);
        }
    }
    return {valid > 0 && below == valid,
            fmt("%d/%d valid rows with ratio < 1; largest %.6f at %s", below, valid, largest, worst.c_str())};
}

Outcome departure_growth() {
    const auto rows = ratio_rows({0.3, 2.0, 4.0}, {10.0}, {Anchor::entrance});
    const double d0 = std::abs(rows[0].ratio - 1.0), d1 = std::abs(rows[1].ratio - 1.0),
                 d2 = std::abs(rows[2].ratio - 1.0);
    return {d0 < d1 && d1 < d2, fmt("|ratio - 1| at L=0.3,2,4: %.3e, %.3e, %.3e", d0, d1, d2)};
}

Outcome asymptotic_approach() {
    const auto rows = ratio_rows({4.0}, {10.0, 100.0}, {Anchor::entrance});
    const double near = std::abs(rows[0].ratio - 1.0), far = std::abs(rows[1].ratio - 1.0);
    return {far < near, fmt("|ratio - 1|: R=10 %.4f, R=100 %.4f", near, far)};
}

Outcome quadrature_oracle() {
    const double L = 5.0;
    const CavitySpec cav{L};
    const DetectorSpec det{0.01, omega_for(L)};
    const Worldline wl = FreeFallWorldline(SchwarzschildBackground(1.0, 10.0));
    const double T = transit_time(wl, L);
    const double k = cav.wavenumber(6);
    const int N = 1'000'000;
    const double h = T / N;
    long double re = 0.0L, im = 0.0L;
    for (int i = 0; i < N; ++i) {
        const double tau = (i + 0.5) * h;
        const WorldlinePoint p = position(wl, tau);
        const cplx v = std::polar(std::sin(k * p.space), det.omega * tau + k * p.time);
        re += v.real();
        im += v.imag();
    }
    const cplx riemann(static_cast<double>(re * h), static_cast<double>(im * h));
    const cplx filon = compute_mode_integrals(6, trajectory_of(wl), T, cav, det, QuadratureConfig{}).I_plus;
    const double rel = std::abs(filon - riemann) / std::abs(riemann);
    return {rel <= 1e-6, fmt("I+6 = %.12f%+.12fi, midpoint sum differs by %.2e relative (limit 1e-6)", filon.real(),
                             filon.imag(), rel)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / fmt("cavity-acceptance-%d", static_cast<int>(std::random_device{}() % 100000));
    fs::create_directories(dir);
    auto fig4 = [&](const std::string& name, const std::string& threads) {
        return cli::run({"figure", "fig4", "--threads", threads, "-o", (dir / name).string()});
    };
    const int a = fig4("a.csv", "1"), b = fig4("b.csv", "1"), c = fig4("c.csv", "4");
    const std::string sa = slurp(dir / "a.csv"), sb = slurp(dir / "b.csv"), sc = slurp(dir / "c.csv");
    std::error_code ec;
    fs::remove_all(dir, ec);
    const bool ok = a == 0 && b == 0 && c == 0 && !sa.empty() && sa == sb && sa == sc;
    return {ok, fmt("exit codes %d/%d/%d; rerun identical: %s; 1 vs 4 threads identical: %s (%zu bytes)", a, b, c,
                    sa == sb ? "yes" : "no", sa == sc ? "yes" : "no", sa.size())};
}

Outcome lambda_scaling() {
    const double L = 5.0;
    const CavitySpec cav{L};
    const SchwarzschildBackground bg(1.0, 10.0);
    const Worldline sch = FreeFallWorldline(bg);
    const Worldline rin = RindlerWorldline(matched_acceleration(bg, L, Anchor::entrance));
    std::string detail;
    bool ok = true;
    for (const auto& [name, wl] : {std::pair{"schwarzschild", sch}, std::pair{"rindler", rin}}) {
        const double T = transit_time(wl, L);
        const double p1 = transition_probability(wl, cav, DetectorSpec{0.01, omega_for(L)}, QuadratureConfig{}, T).P1;
        const double p2 = transition_probability(wl, cav, DetectorSpec{0.02, omega_for(L)}, QuadratureConfig{}, T).P1;
        ok = ok && p2 / p1 == 4.0;
        detail += fmt("%s %.17g; ", name, p2 / p1);
    }
    return {ok, "P1(2 lambda)/P1(lambda): " + detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "unitarity identity", 120.0, unitarity},
        {2, "estimator values", 1.0, estimator_values},
        {3, "estimator closed form", 1.0, closed_form},
        {4, "geodesic transit", 1.0, geodesic_transit},
        {5, "equivalence-principle limit", 300.0, equivalence_limit},
        {6, "middle-anchored ordering", 600.0, middle_ordering},
        {7, "departure growth", 300.0, departure_growth},
        {8, "asymptotic approach", 120.0, asymptotic_approach},
        {9, "quadrature oracle", 60.0, quadrature_oracle},
        {10, "determinism", 600.0, determinism},
        {11, "lambda^2 scaling", 60.0, lambda_scaling},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = out.pass && in_time;
        failed += !pass;
        std::printf("%s criterion %2d %-28s %s [%.2f s / %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    out.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

#include "cavity/numerics.hpp"
#include "panels.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cavity {

namespace {

constexpr int kNodes = 20;

// Gauss-Legendre nodes/weights on [-1, 1] and the Legendre table P_j(x_k),
// built once by Newton iteration on P_q.
struct LegendreRule {
    std::array<double, kNodes> x{};
    std::array<double, kNodes> w{};
    std::array<std::array<double, kNodes>, kNodes> p{};  // p[j][k] = P_j(x_k)

    LegendreRule() {
        for (int i = 0; i < kNodes; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (kNodes + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 1; j <= kNodes; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
                }
                dp = kNodes * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            // Store ascending.
            x[kNodes - 1 - i] = z;
            w[kNodes - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        for (int k = 0; k < kNodes; ++k) {
            p[0][k] = 1.0;
            p[1][k] = x[k];
            for (int j = 1; j + 1 < kNodes; ++j)
                p[j + 1][k] = ((2.0 * j + 1.0) * x[k] * p[j][k] - j * p[j - 1][k]) / (j + 1.0);
        }
    }
};

const LegendreRule& legendre() {
    static const LegendreRule rule;
    return rule;
}

// j_l(x) for l = 0..kNodes-1. Upward recurrence is stable once x exceeds the
// largest order; below that defer to the library routine.
std::array<double, kNodes> spherical_bessel(double x) {
    std::array<double, kNodes> j{};
    const double ax = std::abs(x);
    if (ax > kNodes) {
        const double s = std::sin(ax), c = std::cos(ax);
        j[0] = s / ax;
        j[1] = s / (ax * ax) - c / ax;
        for (int l = 1; l + 1 < kNodes; ++l) j[l + 1] = (2.0 * l + 1.0) / ax * j[l] - j[l - 1];
    } else {
        for (int l = 0; l < kNodes; ++l) j[l] = std::sph_bessel(static_cast<unsigned>(l), ax);
    }
    if (x < 0.0)
        for (int l = 1; l < kNodes; l += 2) j[l] = -j[l];
    return j;
}

detail::Panel filon_panel(const OscillatoryFn& f, double carrier, double a, double b) {
    const auto& rule = legendre();
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);

    std::array<cplx, kNodes> amp{};
    std::array<double, kNodes> phi{};
    double amp_max = 0.0;
    double phi_max = 0.0;
    for (int k = 0; k < kNodes; ++k) {
        const OscillatorySample sample = f(c + h * rule.x[k]);
        amp[k] = sample.amplitude;
        phi[k] = sample.phase;
        amp_max = std::max(amp_max, std::abs(amp[k]));
        phi_max = std::max(phi_max, std::abs(phi[k]));
    }
    // Linear part of the sampled phase through the outermost nodes; x = 0 is
    // their midpoint. The carrier adds carrier * h to the slope exactly.
    const double slope = (phi[kNodes - 1] - phi[0]) / (rule.x[kNodes - 1] - rule.x[0]);
    const double phi0 = 0.5 * (phi[0] + phi[kNodes - 1]);

    std::array<cplx, kNodes> g{};
    for (int k = 0; k < kNodes; ++k) {
        const double residual = (phi[k] - phi0) - slope * rule.x[k];
        g[k] = amp[k] * std::polar(1.0, residual);
    }

    const auto jl = spherical_bessel(slope + carrier * h);
    static constexpr cplx kIPow[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    std::array<cplx, kNodes> coef{};
    cplx sum{0.0, 0.0};
    for (int j = 0; j < kNodes; ++j) {
        cplx aj{0.0, 0.0};
        for (int k = 0; k < kNodes; ++k) aj += rule.w[k] * rule.p[j][k] * g[k];
        aj *= 0.5 * (2.0 * j + 1.0);
        coef[j] = aj;
        sum += aj * (2.0 * jl[j]) * kIPow[j % 4];
    }
    const double tail = std::abs(coef[kNodes - 1]) + std::abs(coef[kNodes - 2]) + std::abs(coef[kNodes - 3]);
    // Rounding in the sampled phase and amplitude puts a plateau under the
    // coefficients roughly (2j+1)/2 times the sample noise. A tail sitting on
    // that plateau says the expansion has converged; the panel then carries
    // only the sample noise itself, integrated over its width.
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double noise = 2.0 * std::abs(h) * amp_max * 4.0 * eps * (1.0 + phi_max);
    const double plateau = 16.0 * noise;
    const double err = 2.0 * std::abs(h) * tail;
    detail::Panel p{a, b, h * unit_phase(carrier, c) * std::polar(1.0, phi0) * sum,
                    err <= plateau ? noise : err, noise};
    if (!std::isfinite(p.value.real()) || !std::isfinite(p.value.imag()))
        throw DomainError("integrate_oscillatory: integrand returned a non-finite value");
    return p;
}

}  // namespace

cplx unit_phase(double frequency, double t) {
    const double p = frequency * t;
    const double e = std::fma(frequency, t, -p);
    return std::polar(1.0, p) * std::polar(1.0, e);
}

QuadratureResult integrate_oscillatory(const OscillatoryFn& f, double a, double b,
                                       const QuadratureConfig& cfg, double carrier) {
    cfg.validate();
    if (!(a <= b)) throw DomainError("integrate_oscillatory: requires a <= b");
    if (a == b) return {};
    constexpr int kInitialPanels = 4;
    std::vector<std::pair<double, double>> initial;
    for (int i = 0; i < kInitialPanels; ++i) {
        const double lo = a + (b - a) * i / kInitialPanels;
        const double hi = i + 1 == kInitialPanels ? b : a + (b - a) * (i + 1) / kInitialPanels;
        initial.emplace_back(lo, hi);
    }
    auto rule = [&](double lo, double hi) { return filon_panel(f, carrier, lo, hi); };
    return detail::summarize(detail::adaptive_panels(rule, std::move(initial), cfg));
}

}  // namespace cavity

#include "cavity/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cavity {

void CavitySpec::validate() const {
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("cavity: L must be > 0");
    if (n_max < 1) throw DomainError("cavity: n_max must be >= 1");
    if (!(tail_rel_tol > 0.0)) throw DomainError("cavity: tail_rel_tol must be > 0");
    if (n_max_limit < 1) throw DomainError("cavity: n_max_limit must be >= 1");
}

double CavitySpec::wavenumber(int n) const { return n * std::numbers::pi / L; }

void DetectorSpec::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("detector: lambda must be > 0");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("detector: omega must be > 0");
}

Trajectory trajectory_of(const Worldline& wl) {
    return [wl](double tau) { return position(wl, tau); };
}

cplx mode_function(int n, double space, double time, const CavitySpec& cavity) {
    if (!(space >= 0.0) || !(space <= cavity.L)) throw DomainError("mode_function: space must lie in [0, L]");
    const double k = cavity.wavenumber(n);
    return std::polar(1.0, k * time) * std::sin(k * space);
}

ComplexFn mode_integrand(int n, int sign, const Trajectory& path, const CavitySpec& cavity,
                         const DetectorSpec& det) {
    const double k = cavity.wavenumber(n);
    const double carrier = sign * det.omega + k;
    return [=](double tau) {
        const WorldlinePoint p = path(tau);
        return unit_phase(carrier, tau) * std::polar(1.0, k * p.lag) * std::sin(k * p.space);
    };
}

namespace {

// The four terms of the first-order Dyson amplitude for mode n,
//   U1 = (lambda/i) [s+ a+ I+ + s- a I+* + s- a+ I- + s+ a I-*],
// acting on |g> x |0>. Only terms that raise the detector and create a
// quantum reach |e, 1_n>; the rest are annihilated (s-|g> = 0, a|0> = 0).
enum class DetectorOp { raise, lower };
enum class FieldOp { create, annihilate };

struct LadderTerm {
    DetectorOp detector;
    FieldOp field;
    cplx coefficient;
};

cplx excitation_amplitude(const ModeIntegral& mode, bool include_counter_rotating) {
    std::vector<LadderTerm> terms{{DetectorOp::raise, FieldOp::create, mode.I_plus}};
    if (include_counter_rotating) {
        terms.push_back({DetectorOp::lower, FieldOp::annihilate, std::conj(mode.I_plus)});
        if (mode.I_minus) {
            terms.push_back({DetectorOp::lower, FieldOp::create, *mode.I_minus});
            terms.push_back({DetectorOp::raise, FieldOp::annihilate, std::conj(*mode.I_minus)});
        }
    }
    cplx amplitude{0.0, 0.0};
    for (const auto& t : terms) {
        const bool detector_survives = t.detector == DetectorOp::raise;  // acting on |g>
        const bool field_survives = t.field == FieldOp::create;          // acting on |0>
        if (detector_survives && field_survives) amplitude += t.coefficient;
    }
    return amplitude;
}

constexpr double kRoundoffSlack = 1e3;
constexpr double kNoiseRelTol = 1e-6;

QuadratureConfig halve_tolerance(QuadratureConfig q) {
    q.abs_tol *= 0.5;
    q.rel_tol *= 0.5;
    return q;
}

struct SegmentedIntegral {
    std::vector<cplx> cumulative;  // value up to each switch-off time
    double error = 0.0;
};

SegmentedIntegral integrate_segments(int n, int sign, const Trajectory& path, const CavitySpec& cavity,
                                     const DetectorSpec& det, const QuadratureConfig& quad,
                                     std::span<const double> tau_ends) {
    const double k = cavity.wavenumber(n);
    // sign Omega tau + omega_n time = (sign Omega + omega_n) tau + omega_n lag
    const double carrier = sign * det.omega + k;
    // sin(k space) = [exp(i k space) - exp(-i k space)] / 2i puts the wall
    // oscillation into the phase as well, where the rule integrates it exactly.
    const OscillatoryFn outgoing = [&](double tau) {
        const WorldlinePoint p = path(tau);
        return OscillatorySample{cplx(0.0, -0.5), k * (p.lag + p.space)};
    };
    const OscillatoryFn incoming = [&](double tau) {
        const WorldlinePoint p = path(tau);
        return OscillatorySample{cplx(0.0, 0.5), k * (p.lag - p.space)};
    };
    const QuadratureConfig half = halve_tolerance(quad);
    auto component = [&](const OscillatoryFn& fn, double lo, double hi) {
        try {
            return integrate_oscillatory(fn, lo, hi, half, carrier);
        } catch (const RoundoffLimitError& e) {
            // Long transits and high modes carry phases of thousands of
            // radians, so the noise floor can sit above abs_tol. Accept it
            // while it stays far below the integral itself.
            const double allowed = std::max(kRoundoffSlack * half.abs_tol, kNoiseRelTol * std::abs(e.best_estimate()));
            if (!(e.error_estimate() <= allowed)) throw;
            return QuadratureResult{e.best_estimate(), e.error_estimate(), 0};
        }
    };
    SegmentedIntegral out;
    out.cumulative.reserve(tau_ends.size());
    cplx running{0.0, 0.0};
    double start = 0.0;
    for (const double end : tau_ends) {
        try {
            const QuadratureResult a = component(outgoing, start, end);
            const QuadratureResult b = component(incoming, start, end);
            running += a.value + b.value;
            out.error += a.error_estimate + b.error_estimate;
        } catch (const AccuracyError& e) {
            std::ostringstream os;
            os << "mode n=" << n << (sign > 0 ? " (I+)" : " (I-)") << ": " << e.what();
            throw AccuracyError(os.str(), running + e.best_estimate(), out.error + e.error_estimate());
        }
        out.cumulative.push_back(running);
        start = end;
    }
    return out;
}

cplx second_order_term(int n, const Trajectory& path, double T, const CavitySpec& cavity,
                       const DetectorSpec& det, const QuadratureConfig& quad) {
    const ComplexFn f = mode_integrand(n, +1, path, cavity, det);
    const ComplexFn f_conj = [&f](double tau) { return std::conj(f(tau)); };
    const double k = cavity.wavenumber(n);
    const RealFn phase = [&](double tau) {
        const WorldlinePoint p = path(tau);
        return det.omega * tau + k * (p.time + p.space);
    };
    try {
        return integrate_triangle_separable(f_conj, f, T, quad, phase).value;
    } catch (const RoundoffLimitError& e) {
        // J exists only to be checked against |I_+|^2; when its double
        // integral is limited by rounding the measured residual reports that.
        return e.best_estimate();
    } catch (const AccuracyError& e) {
        std::ostringstream os;
        os << "mode n=" << n << " (J): " << e.what();
        throw AccuracyError(os.str(), e.best_estimate(), e.error_estimate());
    }
}

double mode_weight(int n) { return 1.0 / (n * std::numbers::pi); }  // 1 / (omega_n L)

// Tolerances with the absolute floor lowered to rel_tol * scale, so small
// integrals are still resolved to relative accuracy.
QuadratureConfig relative_to(QuadratureConfig q, double scale) {
    if (scale > 0.0) q.abs_tol = std::min(q.abs_tol, q.rel_tol * scale);
    return q;
}

// Verification compares two routes at relative accuracy, so I_+ (and I_-)
// are recomputed against their own magnitude before J is formed against
// |I_+|^2.
void refine_for_verification(ModeIntegral& m, const Trajectory& path, double T, const CavitySpec& cavity,
                             const DetectorSpec& det, const QuadratureConfig& quad, bool with_minus) {
    const double ends[1] = {T};
    const auto plus = integrate_segments(m.n, +1, path, cavity, det, relative_to(quad, std::abs(m.I_plus)), ends);
    m.I_plus = plus.cumulative.back();
    m.error_estimate = plus.error;
    if (with_minus && m.I_minus)
        m.I_minus = integrate_segments(m.n, -1, path, cavity, det, relative_to(quad, std::abs(*m.I_minus)), ends)
                        .cumulative.back();
    m.J = second_order_term(m.n, path, T, cavity, det, relative_to(quad, 0.5 * std::norm(m.I_plus)));
}

}  // namespace

ModeIntegral compute_mode_integrals(int n, const Trajectory& path, double T, const CavitySpec& cavity,
                                    const DetectorSpec& det, const QuadratureConfig& quad,
                                    ModeRequest request) {
    cavity.validate();
    det.validate();
    if (n < 1) throw DomainError("compute_mode_integrals: n must be >= 1");
    if (!(T >= 0.0)) throw DomainError("compute_mode_integrals: T must be >= 0");
    const double ends[1] = {T};
    ModeIntegral mode;
    mode.n = n;
    const auto plus = integrate_segments(n, +1, path, cavity, det, quad, ends);
    mode.I_plus = plus.cumulative.back();
    mode.error_estimate = plus.error;
    if (request.with_minus) mode.I_minus = integrate_segments(n, -1, path, cavity, det, quad, ends).cumulative.back();
    if (request.with_J) refine_for_verification(mode, path, T, cavity, det, quad, request.with_minus);
    return mode;
}

double relative_tail_estimate(std::span<const double> c) {
    double total = 0.0;
    for (double v : c) total += v;
    if (total == 0.0) return 0.0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t N = c.size();
    if (N < 8) return inf;

    const std::size_t window = std::min<std::size_t>(32, (N / 2) / 4 * 4);
    const std::size_t block = window / 4;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t first = N - window + b * block;  // zero-based index of first mode in block
        double sum = 0.0;
        for (std::size_t i = 0; i < block; ++i) sum += c[first + i];
        if (!(sum > 0.0)) return inf;
        const double centre = static_cast<double>(first + 1) + 0.5 * static_cast<double>(block - 1);
        const double x = std::log(centre);
        const double y = std::log(sum / static_cast<double>(block));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / 4.0;
    const double p = -slope;
    if (!(p > 1.0)) return inf;
    const double tail = std::exp(intercept) * std::pow(static_cast<double>(N) + 0.5, 1.0 - p) / (p - 1.0);
    return tail / total;
}

std::vector<TransitionResult> transition_profile(const Trajectory& path, const CavitySpec& cavity,
                                                 const DetectorSpec& det, const QuadratureConfig& quad,
                                                 std::span<const double> tau_ends, ResponseOptions options) {
    cavity.validate();
    det.validate();
    quad.validate();
    if (tau_ends.empty()) throw DomainError("transition_profile: no switch-off times given");
    for (std::size_t i = 0; i < tau_ends.size(); ++i) {
        if (!(tau_ends[i] >= 0.0)) throw DomainError("transition_profile: tau_end must be >= 0");
        if (i > 0 && !(tau_ends[i] >= tau_ends[i - 1]))
            throw DomainError("transition_profile: tau_end values must be ascending");
    }
    const std::size_t points = tau_ends.size();

    // modes[k][n-1] for switch-off time k
    std::vector<std::vector<ModeIntegral>> modes(points);
    std::vector<std::vector<double>> terms(points);
    auto add_modes = [&](int from, int to) {
        for (int n = from; n <= to; ++n) {
            const auto plus = integrate_segments(n, +1, path, cavity, det, quad, tau_ends);
            std::optional<SegmentedIntegral> minus;
            if (options.include_counter_rotating)
                minus = integrate_segments(n, -1, path, cavity, det, quad, tau_ends);
            for (std::size_t k = 0; k < points; ++k) {
                ModeIntegral m;
                m.n = n;
                m.I_plus = plus.cumulative[k];
                m.error_estimate = plus.error;
                if (minus) m.I_minus = minus->cumulative[k];
                const cplx amplitude = excitation_amplitude(m, options.include_counter_rotating);
                terms[k].push_back(std::norm(amplitude) * mode_weight(n));
                modes[k].push_back(std::move(m));
            }
        }
    };
    auto worst_tail = [&]() {
        double worst = 0.0;
        for (const auto& t : terms) worst = std::max(worst, relative_tail_estimate(t));
        return worst;
    };

    const int limit = std::max(cavity.n_max_limit, cavity.n_max);
    int n_used = cavity.n_max;
    add_modes(1, n_used);
    while (worst_tail() > cavity.tail_rel_tol && n_used < limit) {
        const int next = std::min(2 * n_used, limit);
        add_modes(n_used + 1, next);
        n_used = next;
    }

    const double lambda2 = det.lambda * det.lambda;
    std::vector<TransitionResult> results(points);
    bool truncated = false;
    for (std::size_t k = 0; k < points; ++k) {
        TransitionResult& r = results[k];
        r.T = tau_ends[k];
        r.modes = std::move(modes[k]);
        if (options.verify_unitarity) {
            double p2_sum = 0.0;
            double residual = 0.0;
            for (std::size_t i = 0; i < r.modes.size(); ++i) {
                ModeIntegral& m = r.modes[i];
                refine_for_verification(m, path, r.T, cavity, det, quad, options.include_counter_rotating);
                terms[k][i] = std::norm(excitation_amplitude(m, options.include_counter_rotating)) * mode_weight(m.n);
                p2_sum += 2.0 * m.J->real() * mode_weight(m.n);
                const double direct = std::norm(m.I_plus);
                if (direct > 0.0) residual = std::max(residual, std::abs(2.0 * m.J->real() - direct) / direct);
            }
            r.P2 = lambda2 * p2_sum;
            r.unitarity_residual = residual;
            r.p2_from_double_quadrature = true;
        }
        double sum = 0.0;
        for (double t : terms[k]) sum += t;  // ascending n
        r.P1 = lambda2 * sum;
        r.truncation_tail = relative_tail_estimate(terms[k]);
        truncated = truncated || r.truncation_tail > cavity.tail_rel_tol;
        if (!options.verify_unitarity) {
            r.P2 = r.P1;
            r.unitarity_residual = std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (truncated) {
        std::ostringstream os;
        os << "mode sum not converged: tail estimate above " << cavity.tail_rel_tol << " with n_max=" << n_used;
        throw TruncationError(os.str(), std::move(results));
    }
    return results;
}

TransitionResult transition_probability(const Trajectory& path, const CavitySpec& cavity,
                                        const DetectorSpec& det, const QuadratureConfig& quad,
                                        double tau_end, ResponseOptions options) {
    if (!(tau_end >= 0.0)) throw DomainError("transition_probability: tau_end must be >= 0");
    const double ends[1] = {tau_end};
    return transition_profile(path, cavity, det, quad, ends, options).front();
}

TransitionResult transition_probability(const Worldline& wl, const CavitySpec& cavity,
                                        const DetectorSpec& det, const QuadratureConfig& quad,
                                        double tau_end, ResponseOptions options) {
    const double transit = transit_time(wl, cavity.L);
    if (tau_end > transit * (1.0 + 1e-12))
        throw DomainError("transition_probability: tau_end exceeds the cavity transit time");
    return transition_probability(trajectory_of(wl), cavity, det, quad, std::min(tau_end, transit), options);
}

}  // namespace cavity

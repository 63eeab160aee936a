#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavity {

using cplx = std::complex<double>;

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
/// Carries the best estimate reached so the caller can decide what to do with it.
class AccuracyError : public std::runtime_error {
  public:
    AccuracyError(const std::string& what, cplx best, double error_estimate)
        : std::runtime_error(what), best_(best), error_(error_estimate) {}

    cplx best_estimate() const noexcept { return best_; }
    double error_estimate() const noexcept { return error_; }

  private:
    cplx best_;
    double error_;
};

/// Refinement stopped because every remaining panel's error estimate sits at
/// the rounding-noise level of its integrand, not because the budget ran out.
class RoundoffLimitError : public AccuracyError {
  public:
    using AccuracyError::AccuracyError;
};

struct QuadratureConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    std::size_t max_subdivisions = 1'000'000;
    double max_phase_per_panel = std::numbers::pi / 2;

    /// Throws DomainError if any field violates its invariant.
    void validate() const;
};

struct QuadratureResult {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
    std::size_t panels_used = 0;
};

using ComplexFn = std::function<cplx(double)>;
using ComplexFn2 = std::function<cplx(double, double)>;
using RealFn = std::function<double(double)>;

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of a smooth complex
/// integrand over [a, b].
///
/// If `phase` is given it is taken as a monotone estimate of the integrand's
/// accumulated phase. The interval is pre-split until no panel spans more than
/// cfg.max_phase_per_panel of it, before any error-driven refinement happens.
QuadratureResult integrate_1d(const ComplexFn& f, double a, double b, const QuadratureConfig& cfg,
                              const RealFn& phase = {});

/// Iterated integral over the triangle 0 <= tau1 <= tau <= T:
///   int_0^T dtau int_0^tau dtau1 f(tau, tau1).
/// Outer and inner integrals are both adaptive; the phase hint (if any) is
/// applied along both axes.
QuadratureResult integrate_triangle(const ComplexFn2& f, double T, const QuadratureConfig& cfg,
                                    const RealFn& phase = {});

/// Triangle integral of a separable integrand outer(tau) * inner(tau1).
///
/// The inner antiderivative is tabulated once on an adaptive panel set and
/// then evaluated at each outer node by a local rule, so the cost is linear in
/// the number of panels rather than quadratic.
QuadratureResult integrate_triangle_separable(const ComplexFn& outer, const ComplexFn& inner,
                                              double T, const QuadratureConfig& cfg,
                                              const RealFn& phase = {});

struct OscillatorySample {
    cplx amplitude{0.0, 0.0};
    double phase = 0.0;
};

using OscillatoryFn = std::function<OscillatorySample(double)>;

/// Adaptive Filon-type quadrature of amplitude(t) * exp(i [carrier t + phase(t)])
/// over [a, b].
///
/// On each panel the phase is split into a linear part, integrated exactly
/// against a Legendre expansion of the remainder (moments are spherical Bessel
/// functions), so panel width is governed by how smooth the amplitude and the
/// phase curvature are, not by the number of oscillations of the carrier.
/// The phase must be smooth; it need not be monotone. Passing the dominant
/// linear frequency as `carrier` rather than folding it into the sampled phase
/// keeps rounding noise in the phase proportional to the remainder only.
QuadratureResult integrate_oscillatory(const OscillatoryFn& f, double a, double b,
                                       const QuadratureConfig& cfg, double carrier = 0.0);

/// exp(i frequency t), with frequency * t formed exactly (FMA residual) so a
/// large phase loses no digits to the product.
cplx unit_phase(double frequency, double t);

/// Derivative-free bracketing root finder (Brent: inverse quadratic /
/// secant steps safeguarded by bisection).
///
/// Requires g(lo) * g(hi) <= 0. Returns a point whose enclosing bracket has
/// width <= tol, or an exact zero of g. Throws DomainError for an invalid
/// bracket.
double find_root(const RealFn& g, double lo, double hi, double tol);

}  // namespace cavity

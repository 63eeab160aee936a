#pragma once

#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavity {

/// Dirichlet cavity of proper length L with the mode-sum truncation policy.
struct CavitySpec {
    double L = 5.0;
    int n_max = 64;              // modes summed before the first tail check
    double tail_rel_tol = 1e-3;  // accepted estimated relative remainder of the mode sum
    int n_max_limit = 512;       // n_max doubles until the tail passes or this is reached

    void validate() const;
    /// omega_n = k_n = n pi / L
    double wavenumber(int n) const;
};

struct DetectorSpec {
    double lambda = 0.01;  // coupling strength
    double omega = 0.0;    // proper energy gap

    void validate() const;
};

struct ModeIntegral {
    int n = 0;
    cplx I_plus{0.0, 0.0};
    std::optional<cplx> I_minus;
    std::optional<cplx> J;
    double error_estimate = 0.0;  // quadrature error bound on I_plus
};

struct TransitionResult {
    double P1 = 0.0;
    double P2 = 0.0;
    std::vector<ModeIntegral> modes;
    double T = 0.0;                   // proper time at switch-off
    double truncation_tail = 0.0;     // estimated relative remainder of the mode sum
    double unitarity_residual = 0.0;  // max_n |2 Re J_n - |I_n|^2| / |I_n|^2; NaN unless verified
    bool p2_from_double_quadrature = false;
};

/// The mode sum did not meet tail_rel_tol even at n_max_limit. The best
/// available results (one per requested switch-off time) travel with it.
class TruncationError : public std::runtime_error {
  public:
    TruncationError(const std::string& what, std::vector<TransitionResult> results)
        : std::runtime_error(what), results_(std::move(results)) {}

    const std::vector<TransitionResult>& results() const noexcept { return results_; }

  private:
    std::vector<TransitionResult> results_;
};

/// Detector trajectory in cavity-frame coordinates as a function of proper time.
using Trajectory = std::function<WorldlinePoint(double)>;

Trajectory trajectory_of(const Worldline& wl);

/// u_n = exp(i omega_n time) sin(k_n space). Throws DomainError outside the cavity.
cplx mode_function(int n, double space, double time, const CavitySpec& cavity);

/// Integrand of I_{+,n} (sign = +1) or I_{-,n} (sign = -1):
///   exp(i [sign Omega tau + omega_n time(tau)]) sin(k_n space(tau)).
ComplexFn mode_integrand(int n, int sign, const Trajectory& path, const CavitySpec& cavity,
                         const DetectorSpec& det);

struct ModeRequest {
    bool with_minus = true;
    bool with_J = false;
};

/// I_{+,n}, optionally I_{-,n} and the second-order term J_n, over [0, T].
///
/// I_{+/-} use the Filon-type oscillatory rule. J_n is an iterated double
/// integral over 0 <= tau1 <= tau <= T computed with adaptive Gauss-Kronrod,
/// so it shares no quadrature with I_{+,n}.
ModeIntegral compute_mode_integrals(int n, const Trajectory& path, double T, const CavitySpec& cavity,
                                    const DetectorSpec& det, const QuadratureConfig& quad,
                                    ModeRequest request = {});

struct ResponseOptions {
    /// Compute every J_n by double quadrature and take P2 from it. Otherwise
    /// P2 is set from P1 through 2 Re J_n = |I_{+,n}|^2.
    bool verify_unitarity = false;
    /// Also evaluate the I_{-,n} terms of the first-order amplitude and let
    /// the vacuum selection rule discard them.
    bool include_counter_rotating = false;
};

/// Leading-order excitation probability for sharp switching on [0, tau_end]:
///   P1 = lambda^2 sum_n |I_{+,n}|^2 / (omega_n L),
/// accumulated in ascending n. Escalates n_max by doubling until the tail
/// estimate meets cavity.tail_rel_tol; throws TruncationError otherwise.
TransitionResult transition_probability(const Trajectory& path, const CavitySpec& cavity,
                                        const DetectorSpec& det, const QuadratureConfig& quad,
                                        double tau_end, ResponseOptions options = {});

TransitionResult transition_probability(const Worldline& wl, const CavitySpec& cavity,
                                        const DetectorSpec& det, const QuadratureConfig& quad,
                                        double tau_end, ResponseOptions options = {});

/// P1 at several switch-off times along one transit. tau_ends must be
/// ascending and positive. Each mode integral is built from consecutive
/// segments and prefix-summed, so every point reuses the work of the ones
/// before it.
std::vector<TransitionResult> transition_profile(const Trajectory& path, const CavitySpec& cavity,
                                                 const DetectorSpec& det, const QuadratureConfig& quad,
                                                 std::span<const double> tau_ends,
                                                 ResponseOptions options = {});

/// Estimated relative remainder sum_{n>N} c_n / sum_{n<=N} c_n of a mode sum
/// from its terms c_1..c_N, by a power-law fit to block sums over the last
/// modes. Returns 0 for an identically zero sum and +inf when the terms do not
/// decay faster than 1/n.
double relative_tail_estimate(std::span<const double> contributions);

}  // namespace cavity

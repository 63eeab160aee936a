#pragma once

#include "cavity/detector.hpp"
#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"
#include "cavity/validity.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cavity {

enum class Scenario { schwarzschild, rindler, both };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

/// Detector gap: resonant with cavity mode n (Omega = n pi / L), or fixed.
struct OmegaRule {
    int resonant_mode = 6;
    std::optional<double> explicit_omega;

    double omega(double L) const;
    void validate() const;
};

struct SweepSpec {
    Scenario scenario = Scenario::both;
    double m = 1.0;
    std::vector<double> L{5.0};
    std::vector<double> R{10.0};
    double lambda = 0.01;
    OmegaRule omega_rule;
    std::vector<Anchor> anchors{Anchor::entrance};
    std::vector<double> tau_grid;  // fractions of each scenario's transit time, ascending in (0, 1]
    double validity_threshold = kDefaultValidityThreshold;

    // Truncation and accuracy settings shared by every row; L is taken from the grid.
    int n_max = 64;
    double tail_rel_tol = 1e-3;
    int n_max_limit = 512;
    QuadratureConfig quad;
    bool verify_unitarity = false;
    int threads = 1;

    void validate() const;
};

/// Validity annotations on a row. Several may apply at once.
struct RowFlags {
    bool horizon = false;           // cavity reaches the horizon: row skipped
    bool estimator_above = false;   // estimator exceeds the validity threshold
    bool truncated = false;         // mode sum missed tail_rel_tol at n_max_limit

    bool any() const noexcept { return horizon || estimator_above || truncated; }
    /// "ok" or a ';'-joined list of the set flags.
    std::string str() const;
};

struct SweepRow {
    double R = 0.0;
    double L = 0.0;
    double m = 1.0;
    double a = 0.0;  // matched Rindler acceleration; NaN without a Rindler run
    Anchor anchor = Anchor::entrance;
    double tau_fraction = 1.0;
    double tau_end_schwarzschild = 0.0;
    double tau_end_rindler = 0.0;
    std::optional<double> P1_schwarzschild;
    std::optional<double> P1_rindler;
    double ratio = 0.0;      // NaN unless both probabilities are present
    double estimator = 0.0;  // NaN when the cavity does not fit
    double tail_schwarzschild = 0.0;
    double tail_rindler = 0.0;
    double unitarity_residual = 0.0;  // worst over the row's runs; NaN unless verified
    RowFlags flags;
};

/// Fig. 3: P1 along one transit at each fraction of the scenario's own transit time.
std::vector<SweepRow> run_transit_profile(const SweepSpec& spec);

/// Fig. 4: full-transit P1 for one L over the R grid, acceleration matched at spec.anchors[0].
std::vector<SweepRow> run_radius_sweep(const SweepSpec& spec);

/// Fig. 5: full-transit ratio for every (L, anchor, R), in that nesting order.
std::vector<SweepRow> run_ratio_curves(const SweepSpec& spec);

struct EstimatorRow {
    double R = 0.0;
    double L = 0.0;
    double m = 1.0;
    double estimator = 0.0;  // NaN when flagged invalid
    bool valid = true;       // false when the cavity reaches the horizon
    bool above_threshold = false;
};

struct EstimatorSurface {
    std::vector<EstimatorRow> surface;      // R outer, L inner
    std::vector<EstimatorRow> slice_fixed_L;  // L = slice_L, varying R over R_grid
    std::vector<EstimatorRow> slice_fixed_R;  // R = slice_R, varying L over L_grid
};

/// Fig. 2: estimator over an (R, L) grid plus the two inset slices.
EstimatorSurface run_estimator_surface(const std::vector<double>& R_grid, const std::vector<double>& L_grid,
                                       double m, double slice_L = 2.0, double slice_R = 10.0,
                                       double threshold = kDefaultValidityThreshold);

/// n points geometrically spaced from lo to hi inclusive.
std::vector<double> geometric_grid(double lo, double hi, int n);
/// n points evenly spaced from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, int n);

/// Runs work(i) for i in [0, count) on up to `threads` workers. Results land
/// by index, so ordering never depends on scheduling. The exception of the
/// lowest failing index is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& work);

}  // namespace cavity

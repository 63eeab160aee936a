#include "cavity/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace cavity {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool wants_schwarzschild(Scenario s) { return s != Scenario::rindler; }
bool wants_rindler(Scenario s) { return s != Scenario::schwarzschild; }

// Every P1 evaluation in a sweep goes through here so identical inputs give
// identical bits, whichever sweep or thread asks.
struct Run {
    std::vector<TransitionResult> results;
    double tail_rel_tol = 0.0;

    bool truncated(std::size_t k) const { return !(results[k].truncation_tail <= tail_rel_tol); }
};

Run run_worldline(const Worldline& wl, double L, const SweepSpec& spec, const std::vector<double>& fractions) {
    CavitySpec cavity{L, spec.n_max, spec.tail_rel_tol, spec.n_max_limit};
    DetectorSpec det{spec.lambda, spec.omega_rule.omega(L)};
    const double T = transit_time(wl, L);
    std::vector<double> ends;
    ends.reserve(fractions.size());
    for (double f : fractions) ends.push_back(f == 1.0 ? T : f * T);
    ResponseOptions options;
    options.verify_unitarity = spec.verify_unitarity;
    Run run;
    run.tail_rel_tol = spec.tail_rel_tol;
    try {
        run.results = transition_profile(trajectory_of(wl), cavity, det, spec.quad, ends, options);
    } catch (const TruncationError& e) {
        run.results = e.results();
    }
    return run;
}

double worst_residual(double a, double b) {
    if (std::isnan(a)) return b;
    if (std::isnan(b)) return a;
    return std::max(a, b);
}

double estimator_or_nan(double R, double L, double m) {
    const SchwarzschildBackground bg(m, R);
    if (!(L > 0.0) || !bg.cavity_fits(L)) return kNaN;
    return estimator(R, L, m).ratio;
}

SweepRow blank_row(double R, double L, const SweepSpec& spec, Anchor anchor) {
    SweepRow row;
    row.R = R;
    row.L = L;
    row.m = spec.m;
    row.anchor = anchor;
    row.a = kNaN;
    row.ratio = kNaN;
    row.tail_schwarzschild = kNaN;
    row.tail_rindler = kNaN;
    row.tau_end_schwarzschild = kNaN;
    row.tau_end_rindler = kNaN;
    row.unitarity_residual = kNaN;
    row.estimator = estimator_or_nan(R, L, spec.m);
    const SchwarzschildBackground bg(spec.m, R);
    row.flags.horizon = !bg.cavity_fits(L);
    row.flags.estimator_above = !row.flags.horizon && row.estimator > spec.validity_threshold;
    return row;
}

void fill_schwarzschild(SweepRow& row, const Run& run, std::size_t k) {
    const TransitionResult& r = run.results[k];
    row.P1_schwarzschild = r.P1;
    row.tau_end_schwarzschild = r.T;
    row.tail_schwarzschild = r.truncation_tail;
    row.unitarity_residual = worst_residual(row.unitarity_residual, r.unitarity_residual);
    row.flags.truncated = row.flags.truncated || run.truncated(k);
}

void fill_rindler(SweepRow& row, const Run& run, std::size_t k, double a) {
    const TransitionResult& r = run.results[k];
    row.a = a;
    row.P1_rindler = r.P1;
    row.tau_end_rindler = r.T;
    row.tail_rindler = r.truncation_tail;
    row.unitarity_residual = worst_residual(row.unitarity_residual, r.unitarity_residual);
    row.flags.truncated = row.flags.truncated || run.truncated(k);
}

void finish_ratio(SweepRow& row) {
    if (row.P1_schwarzschild && row.P1_rindler) row.ratio = *row.P1_schwarzschild / *row.P1_rindler;
}

// Full-transit rows for every (L, anchor, R). The Schwarzschild run of a cell
// does not depend on the anchor and is shared by all its anchors.
std::vector<SweepRow> full_transit_rows(const SweepSpec& spec, const std::vector<double>& Ls,
                                        const std::vector<Anchor>& anchors) {
    const std::vector<double> full{1.0};
    const std::size_t nL = Ls.size(), nA = anchors.size(), nR = spec.R.size();

    struct Job {
        std::size_t iL, iR;
        std::optional<std::size_t> iA;  // empty for the Schwarzschild run
    };
    std::vector<Job> jobs;
    for (std::size_t iL = 0; iL < nL; ++iL) {
        for (std::size_t iR = 0; iR < nR; ++iR) {
            if (!SchwarzschildBackground(spec.m, spec.R[iR]).cavity_fits(Ls[iL])) continue;
            if (wants_schwarzschild(spec.scenario)) jobs.push_back({iL, iR, std::nullopt});
            if (wants_rindler(spec.scenario))
                for (std::size_t iA = 0; iA < nA; ++iA) jobs.push_back({iL, iR, iA});
        }
    }
    std::vector<Run> runs(jobs.size());
    std::vector<double> accel(jobs.size(), kNaN);
    parallel_for(jobs.size(), spec.threads, [&](std::size_t j) {
        const Job& job = jobs[j];
        const double L = Ls[job.iL];
        const SchwarzschildBackground bg(spec.m, spec.R[job.iR]);
        if (!job.iA) {
            runs[j] = run_worldline(FreeFallWorldline(bg), L, spec, full);
        } else {
            accel[j] = matched_acceleration(bg, L, anchors[*job.iA]);
            runs[j] = run_worldline(RindlerWorldline(accel[j]), L, spec, full);
        }
    });

    std::vector<SweepRow> rows;
    rows.reserve(nL * nA * nR);
    for (std::size_t iL = 0; iL < nL; ++iL) {
        for (std::size_t iA = 0; iA < nA; ++iA) {
            for (std::size_t iR = 0; iR < nR; ++iR) {
                SweepRow row = blank_row(spec.R[iR], Ls[iL], spec, anchors[iA]);
                for (std::size_t j = 0; j < jobs.size(); ++j) {
                    const Job& job = jobs[j];
                    if (job.iL != iL || job.iR != iR) continue;
                    if (!job.iA) fill_schwarzschild(row, runs[j], 0);
                    else if (*job.iA == iA) fill_rindler(row, runs[j], 0, accel[j]);
                }
                finish_ratio(row);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

}  // namespace

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::schwarzschild: return "schwarzschild";
        case Scenario::rindler: return "rindler";
        case Scenario::both: return "both";
    }
    return "both";
}

Scenario parse_scenario(std::string_view text) {
    if (text == "schwarzschild") return Scenario::schwarzschild;
    if (text == "rindler") return Scenario::rindler;
    if (text == "both") return Scenario::both;
    throw DomainError("scenario must be 'schwarzschild', 'rindler' or 'both', got '" + std::string(text) + "'");
}

double OmegaRule::omega(double L) const {
    if (explicit_omega) return *explicit_omega;
    return resonant_mode * std::numbers::pi / L;
}

void OmegaRule::validate() const {
    if (explicit_omega) {
        if (!(*explicit_omega > 0.0) || !std::isfinite(*explicit_omega))
            throw DomainError("omega must be > 0");
    } else if (resonant_mode < 1) {
        throw DomainError("omega resonant mode must be >= 1");
    }
}

std::string RowFlags::str() const {
    std::string out;
    auto add = [&out](const char* name) {
        if (!out.empty()) out += ';';
        out += name;
    };
    if (horizon) add("cavity_reaches_horizon");
    if (estimator_above) add("estimator_above_threshold");
    if (truncated) add("mode_sum_not_converged");
    return out.empty() ? "ok" : out;
}

void SweepSpec::validate() const {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("m must be > 0");
    if (L.empty()) throw DomainError("L grid is empty");
    if (R.empty()) throw DomainError("R grid is empty");
    for (double l : L)
        if (!(l > 0.0) || !std::isfinite(l)) throw DomainError("L must be > 0");
    for (double r : R)
        if (!(r > 2.0 * m) || !std::isfinite(r)) throw DomainError("R must exceed 2m");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be > 0");
    omega_rule.validate();
    if (anchors.empty()) throw DomainError("anchor list is empty");
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (!(tau_grid[i] > 0.0) || !(tau_grid[i] <= 1.0))
            throw DomainError("tau_grid fractions must lie in (0, 1]");
        if (i > 0 && !(tau_grid[i] > tau_grid[i - 1])) throw DomainError("tau_grid must be strictly ascending");
    }
    if (!(validity_threshold > 0.0)) throw DomainError("validity threshold must be > 0");
    CavitySpec{L.front(), n_max, tail_rel_tol, n_max_limit}.validate();
    quad.validate();
    if (threads < 1) throw DomainError("threads must be >= 1");
}

std::vector<SweepRow> run_transit_profile(const SweepSpec& spec) {
    spec.validate();
    if (spec.L.size() != 1 || spec.R.size() != 1) throw DomainError("transit profile takes a single R and L");
    if (spec.tau_grid.empty()) throw DomainError("transit profile needs a tau_grid");
    const double R = spec.R.front(), L = spec.L.front();
    const Anchor anchor = spec.anchors.front();
    const SchwarzschildBackground bg(spec.m, R);
    bg.require_cavity_fits(L);

    const double a = matched_acceleration(bg, L, anchor);
    Run sch, rin;
    std::vector<std::function<void()>> jobs;
    if (wants_schwarzschild(spec.scenario))
        jobs.push_back([&] { sch = run_worldline(FreeFallWorldline(bg), L, spec, spec.tau_grid); });
    if (wants_rindler(spec.scenario))
        jobs.push_back([&] { rin = run_worldline(RindlerWorldline(a), L, spec, spec.tau_grid); });
    parallel_for(jobs.size(), spec.threads, [&](std::size_t i) { jobs[i](); });

    std::vector<SweepRow> rows;
    for (std::size_t k = 0; k < spec.tau_grid.size(); ++k) {
        SweepRow row = blank_row(R, L, spec, anchor);
        row.tau_fraction = spec.tau_grid[k];
        if (!sch.results.empty()) fill_schwarzschild(row, sch, k);
        if (!rin.results.empty()) fill_rindler(row, rin, k, a);
        finish_ratio(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SweepRow> run_radius_sweep(const SweepSpec& spec) {
    spec.validate();
    if (spec.L.size() != 1) throw DomainError("radius sweep takes a single L");
    return full_transit_rows(spec, spec.L, {spec.anchors.front()});
}

std::vector<SweepRow> run_ratio_curves(const SweepSpec& spec) {
    spec.validate();
    return full_transit_rows(spec, spec.L, spec.anchors);
}

EstimatorSurface run_estimator_surface(const std::vector<double>& R_grid, const std::vector<double>& L_grid,
                                       double m, double slice_L, double slice_R, double threshold) {
    if (!(m > 0.0)) throw DomainError("m must be > 0");
    if (R_grid.empty() || L_grid.empty()) throw DomainError("estimator surface needs non-empty grids");
    for (double r : R_grid)
        if (!(r > 2.0 * m)) throw DomainError("R must exceed 2m");
    for (double l : L_grid)
        if (!(l > 0.0)) throw DomainError("L must be > 0");
    if (!(slice_R > 2.0 * m)) throw DomainError("slice R must exceed 2m");
    if (!(slice_L > 0.0)) throw DomainError("slice L must be > 0");

    auto cell = [&](double R, double L) {
        EstimatorRow row{R, L, m, estimator_or_nan(R, L, m), true, false};
        row.valid = !std::isnan(row.estimator);
        row.above_threshold = row.valid && row.estimator > threshold;
        return row;
    };
    EstimatorSurface out;
    for (double R : R_grid)
        for (double L : L_grid) out.surface.push_back(cell(R, L));
    for (double R : R_grid) out.slice_fixed_L.push_back(cell(R, slice_L));
    for (double L : L_grid) out.slice_fixed_R.push_back(cell(slice_R, L));
    return out;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw DomainError("geometric grid needs n >= 1 and 0 < lo <= hi");
    if (n == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(n));
    const double ratio = std::log(hi / lo);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(ratio * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
    if (n < 1 || !(hi >= lo)) throw DomainError("linear grid needs n >= 1 and lo <= hi");
    if (n == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& work) {
    if (count == 0) return;
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
    std::vector<std::exception_ptr> errors(count);
    auto guarded = [&](std::size_t i) {
        try {
            work(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) guarded(i);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace cavity

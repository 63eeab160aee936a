#include "cavity/numerics.hpp"
#include "panels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

namespace cavity {

void QuadratureConfig::validate() const {
    if (!(abs_tol > 0.0)) throw DomainError("quadrature: abs_tol must be > 0");
    if (!(rel_tol > 0.0)) throw DomainError("quadrature: rel_tol must be > 0");
    if (max_subdivisions < 1) throw DomainError("quadrature: max_subdivisions must be >= 1");
    if (!(max_phase_per_panel > 0.0))
        throw DomainError("quadrature: max_phase_per_panel must be > 0");
}

namespace detail {
namespace {

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss rule
// (QUADPACK qk15 constants).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

constexpr double kStallFloorFactor = 1e3;

struct WorseFirst {
    bool operator()(const Panel& x, const Panel& y) const { return x.error < y.error; }
};

bool splittable(const Panel& p) {
    const double scale = std::max({std::abs(p.a), std::abs(p.b), std::numeric_limits<double>::min()});
    return (p.b - p.a) > 64.0 * std::numeric_limits<double>::epsilon() * scale;
}

void check_finite(cplx v) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw DomainError("quadrature: integrand returned a non-finite value");
}

}  // namespace

Panel gauss_kronrod_15(const ComplexFn& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    std::array<cplx, 15> fv;
    fv[7] = f(c);
    for (int k = 0; k < 7; ++k) {
        const double dx = h * kXgk[k];
        fv[k] = f(c - dx);
        fv[14 - k] = f(c + dx);
    }
    cplx resk = kWgk[7] * fv[7];
    cplx resg = kWg[3] * fv[7];
    double resabs = kWgk[7] * std::abs(fv[7]);
    for (int k = 0; k < 7; ++k) {
        resk += kWgk[k] * (fv[k] + fv[14 - k]);
        resabs += kWgk[k] * (std::abs(fv[k]) + std::abs(fv[14 - k]));
        if (k % 2 == 1) resg += kWg[k / 2] * (fv[k] + fv[14 - k]);
    }
    const cplx mean = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fv[7] - mean);
    for (int k = 0; k < 7; ++k) resasc += kWgk[k] * (std::abs(fv[k] - mean) + std::abs(fv[14 - k] - mean));

    // QUADPACK error scaling: |K - G| overstates the error of a well-resolved
    // panel by orders of magnitude, so it is damped relative to the spread of
    // the integrand, then floored at the roundoff level.
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double err = std::abs(resk - resg) * h;
    resabs *= std::abs(h);
    resasc *= std::abs(h);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double floor = 50.0 * eps * resabs;
    Panel p{a, b, resk * h, std::max(err, floor), floor};
    check_finite(p.value);
    return p;
}

std::vector<Panel> adaptive_panels(const std::function<Panel(double, double)>& rule,
                                   std::vector<std::pair<double, double>> initial,
                                   const QuadratureConfig& cfg, bool* roundoff_limited) {
    if (roundoff_limited) *roundoff_limited = false;
    std::priority_queue<Panel, std::vector<Panel>, WorseFirst> heap;
    std::vector<Panel> frozen;  // too narrow to split, or already at roundoff level
    cplx total{0.0, 0.0};
    double total_err = 0.0;
    for (const auto& [lo, hi] : initial) {
        Panel p = rule(lo, hi);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }

    auto collect = [&]() {
        std::vector<Panel> out = std::move(frozen);
        while (!heap.empty()) {
            out.push_back(heap.top());
            heap.pop();
        }
        std::sort(out.begin(), out.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
        return out;
    };
    auto exact_totals = [&]() {
        cplx v{0.0, 0.0};
        double e = 0.0;
        for (const auto& p : frozen) {
            v += p.value;
            e += p.error;
        }
        auto copy = heap;
        while (!copy.empty()) {
            v += copy.top().value;
            e += copy.top().error;
            copy.pop();
        }
        total = v;
        total_err = e;
    };

    std::size_t count = initial.size();
    for (;;) {
        if (total_err <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total))) {
            // Running sums drift; confirm with a fresh pass before stopping.
            exact_totals();
            if (total_err <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total))) break;
        }
        if (heap.empty()) {
            if (roundoff_limited) {
                *roundoff_limited = true;
                break;
            }
            throw RoundoffLimitError("quadrature: roundoff limit reached before tolerance", total, total_err);
        }
        Panel worst = heap.top();
        heap.pop();
        if (!splittable(worst) || worst.error <= worst.floor) {
            frozen.push_back(worst);
            continue;
        }
        if (count >= cfg.max_subdivisions) {
            heap.push(worst);
            exact_totals();
            throw AccuracyError("quadrature: subdivision budget exhausted", total, total_err);
        }
        const double mid = 0.5 * (worst.a + worst.b);
        Panel left = rule(worst.a, mid);
        Panel right = rule(mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        ++count;
        // Near the noise floor a split that fails to halve the error means the
        // estimate is measuring roundoff, not truncation; stop refining there.
        const bool stalled = left.error + right.error >= 0.5 * worst.error &&
                             worst.error <= kStallFloorFactor * worst.floor;
        for (Panel* child : {&left, &right}) {
            if (stalled) frozen.push_back(*child);
            else heap.push(*child);
        }
    }
    return collect();
}

std::vector<std::pair<double, double>> phase_partition(double a, double b, const RealFn& phase,
                                                       const QuadratureConfig& cfg) {
    if (!phase) return {{a, b}};
    std::vector<std::pair<double, double>> out;
    std::vector<std::pair<double, double>> stack{{a, b}};
    while (!stack.empty()) {
        auto [lo, hi] = stack.back();
        stack.pop_back();
        const double dphi = std::abs(phase(hi) - phase(lo));
        const Panel probe{lo, hi, {}, 0.0};
        if (dphi > cfg.max_phase_per_panel && splittable(probe) &&
            out.size() + stack.size() + 1 < cfg.max_subdivisions) {
            const double mid = 0.5 * (lo + hi);
            // Right half first so panels come off the stack left to right.
            stack.emplace_back(mid, hi);
            stack.emplace_back(lo, mid);
        } else {
            out.emplace_back(lo, hi);
        }
    }
    return out;
}

QuadratureResult summarize(const std::vector<Panel>& panels) {
    QuadratureResult r;
    for (const auto& p : panels) {
        r.value += p.value;
        r.error_estimate += p.error;
    }
    r.panels_used = panels.size();
    return r;
}

}  // namespace detail

QuadratureResult integrate_1d(const ComplexFn& f, double a, double b, const QuadratureConfig& cfg,
                              const RealFn& phase) {
    cfg.validate();
    if (!(a <= b)) throw DomainError("integrate_1d: requires a <= b");
    if (a == b) return {};
    auto rule = [&f](double lo, double hi) { return detail::gauss_kronrod_15(f, lo, hi); };
    return detail::summarize(detail::adaptive_panels(rule, detail::phase_partition(a, b, phase, cfg), cfg));
}

QuadratureResult integrate_triangle(const ComplexFn2& f, double T, const QuadratureConfig& cfg,
                                    const RealFn& phase) {
    cfg.validate();
    if (!(T >= 0.0)) throw DomainError("integrate_triangle: requires T >= 0");
    if (T == 0.0) return {};
    double inner_err_max = 0.0;
    std::size_t inner_panels = 0;
    auto outer = [&](double tau) -> cplx {
        if (tau == 0.0) return {0.0, 0.0};
        const auto inner = integrate_1d([&](double tau1) { return f(tau, tau1); }, 0.0, tau, cfg, phase);
        inner_err_max = std::max(inner_err_max, inner.error_estimate);
        inner_panels += inner.panels_used;
        return inner.value;
    };
    QuadratureResult r = integrate_1d(outer, 0.0, T, cfg, phase);
    r.error_estimate += T * inner_err_max;
    r.panels_used += inner_panels;
    return r;
}

QuadratureResult integrate_triangle_separable(const ComplexFn& outer, const ComplexFn& inner, double T,
                                              const QuadratureConfig& cfg, const RealFn& phase) {
    cfg.validate();
    if (!(T >= 0.0)) throw DomainError("integrate_triangle_separable: requires T >= 0");
    if (T == 0.0) return {};

    auto rule = [&inner](double lo, double hi) { return detail::gauss_kronrod_15(inner, lo, hi); };
    // The tabulated antiderivative's error reaches the result multiplied by
    // T max|outer|, so its budget is scaled down by a sampled bound on that.
    constexpr int kOuterSamples = 256;
    double outer_bound = 0.0;
    for (int i = 0; i <= kOuterSamples; ++i) outer_bound = std::max(outer_bound, std::abs(outer(T * i / kOuterSamples)));
    QuadratureConfig inner_cfg = cfg;
    inner_cfg.abs_tol *= 0.25 / std::max(1.0, T * outer_bound);
    inner_cfg.rel_tol *= 0.1;
    QuadratureConfig outer_cfg = cfg;
    outer_cfg.abs_tol *= 0.5;
    outer_cfg.rel_tol *= 0.5;
    bool inner_noisy = false;
    const auto panels =
        detail::adaptive_panels(rule, detail::phase_partition(0.0, T, phase, cfg), inner_cfg, &inner_noisy);

    std::vector<double> starts(panels.size());
    std::vector<cplx> prefix(panels.size() + 1, cplx{0.0, 0.0});
    double inner_err = 0.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        starts[i] = panels[i].a;
        prefix[i + 1] = prefix[i] + panels[i].value;
        inner_err += panels[i].error;
    }
    auto antiderivative = [&](double tau) -> cplx {
        auto it = std::upper_bound(starts.begin(), starts.end(), tau);
        const std::size_t i = it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
        if (tau <= starts[i]) return prefix[i];
        return prefix[i] + detail::gauss_kronrod_15(inner, starts[i], tau).value;
    };

    double outer_max = 0.0;
    const ComplexFn integrand = [&](double tau) -> cplx {
        const cplx g = outer(tau);
        outer_max = std::max(outer_max, std::abs(g));
        return g * antiderivative(tau);
    };
    bool outer_noisy = false;
    QuadratureResult r;
    try {
        r = integrate_1d(integrand, 0.0, T, outer_cfg, phase);
    } catch (const RoundoffLimitError& e) {
        outer_noisy = true;
        r = {e.best_estimate(), e.error_estimate(), 0};
    }
    r.error_estimate += T * outer_max * inner_err;
    r.panels_used += panels.size();
    if (r.error_estimate > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(r.value))) {
        if (inner_noisy || outer_noisy)
            throw RoundoffLimitError("quadrature: roundoff limit reached before tolerance", r.value,
                                     r.error_estimate);
        throw AccuracyError("quadrature: inner and outer errors together exceed tolerance", r.value,
                            r.error_estimate);
    }
    return r;
}

}  // namespace cavity

#pragma once

#include "cavity/numerics.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace cavity::detail {

struct Panel {
    double a = 0.0;
    double b = 0.0;
    cplx value{0.0, 0.0};
    double error = 0.0;
    double floor = 0.0;  // roundoff level; splitting cannot push error below it
};

Panel gauss_kronrod_15(const ComplexFn& f, double a, double b);

// Global adaptive bisection driven by the largest panel error. Returns the
// final panels sorted by left endpoint. With accept_roundoff the panels are
// returned (and *roundoff_limited set) when every panel sits at its noise
// floor before the tolerance is met; otherwise that case throws.
std::vector<Panel> adaptive_panels(const std::function<Panel(double, double)>& rule,
                                   std::vector<std::pair<double, double>> initial,
                                   const QuadratureConfig& cfg, bool* roundoff_limited = nullptr);

// Splits [a, b] until no panel spans more than cfg.max_phase_per_panel of the
// supplied phase. Without a phase the interval comes back whole.
std::vector<std::pair<double, double>> phase_partition(double a, double b, const RealFn& phase,
                                                       const QuadratureConfig& cfg);

QuadratureResult summarize(const std::vector<Panel>& panels);

}  // namespace cavity::detail

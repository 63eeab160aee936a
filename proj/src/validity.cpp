#include "cavity/validity.hpp"
#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"

#include <cmath>

namespace cavity {

double tortoise(double r, double m) {
    if (!(m > 0.0)) throw DomainError("tortoise: m must be > 0");
    if (!(r > 2.0 * m)) throw DomainError("tortoise: r must exceed 2m");
    return r + 2.0 * m * std::log(r / (2.0 * m) - 1.0);
}

namespace {

void check_estimator_domain(double R, double L, double m) {
    if (!(L > 0.0)) throw DomainError("estimator: L must be > 0");
    SchwarzschildBackground(m, R).require_cavity_fits(L);
}

}  // namespace

EstimatorReport estimator(double R, double L, double m) {
    check_estimator_domain(R, L, m);
    const SchwarzschildBackground bg(m, R);
    const double r_exit = bg.radius_at_depth(L);
    return {(tortoise(R, m) - tortoise(r_exit, m)) / L, R, L, m};
}

double estimator_closed_form(double R, double L, double m) {
    check_estimator_domain(R, L, m);
    const double proper_radius = std::sqrt(R * R - 2.0 * m * R);
    return std::sqrt(1.0 - 2.0 * m / R) - (2.0 * m / L) * std::log1p(-L / proper_radius);
}

}  // namespace cavity

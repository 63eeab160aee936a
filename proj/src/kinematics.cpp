#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace cavity {

namespace {

// Odd power series sum_{k>=1} c_k x^(2k+1) summed until the terms stop
// contributing; used below 0.5 where the closed forms lose digits.
template <class Coefficient>
double odd_tail_series(double x, Coefficient c) {
    const double x2 = x * x;
    double power = x * x2;
    double sum = 0.0;
    for (int k = 1; k < 60; ++k) {
        const double term = c(k) * power;
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
        power *= x2;
    }
    return sum;
}

// x - sin x
double x_minus_sin(double x) {
    if (std::abs(x) >= 0.5) return x - std::sin(x);
    // sum (-1)^(k+1) x^(2k+1) / (2k+1)!
    double factorial = 1.0;
    int last = 1;
    return odd_tail_series(x, [&](int k) {
        for (int j = last + 1; j <= 2 * k + 1; ++j) factorial *= j;
        last = 2 * k + 1;
        return (k % 2 == 1 ? 1.0 : -1.0) / factorial;
    });
}

// atanh(x) - x
double atanh_minus_x(double x) {
    if (std::abs(x) >= 0.5) return std::atanh(x) - x;
    return odd_tail_series(x, [](int k) { return 1.0 / (2.0 * k + 1.0); });
}

// x - atan x
double x_minus_atan(double x) {
    if (std::abs(x) >= 0.5) return x - std::atan(x);
    return odd_tail_series(x, [](int k) { return (k % 2 == 1 ? 1.0 : -1.0) / (2.0 * k + 1.0); });
}

}  // namespace

SchwarzschildBackground::SchwarzschildBackground(double m, double R) : m_(m), R_(R), redshift_(0.0) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("background: m must be > 0");
    if (!(R > 2.0 * m) || !std::isfinite(R)) throw DomainError("background: R must exceed 2m");
    redshift_ = std::sqrt(1.0 - 2.0 * m / R);
}

void SchwarzschildBackground::require_cavity_fits(double L) const {
    if (!(L >= 0.0)) throw DomainError("cavity length L must be >= 0");
    if (!cavity_fits(L)) {
        std::ostringstream os;
        os << "cavity of proper length L=" << L << " at R=" << R_ << " reaches the horizon r=2m="
           << 2.0 * m_;
        throw DomainError(os.str());
    }
}

std::pair<double, double> frame_transform(double r, double t, const SchwarzschildBackground& bg) {
    if (!(r > 2.0 * bg.m()) || !(r <= bg.R()))
        throw DomainError("frame_transform: r must lie in (2m, R]");
    return {(bg.R() - r) / bg.redshift(), bg.redshift() * t};
}

FreeFallWorldline::FreeFallWorldline(SchwarzschildBackground bg)
    : bg_(bg),
      theta_h_(2.0 * std::acos(std::sqrt(2.0 * bg.m() / bg.R()))),
      tau_scale_(std::sqrt(bg.R() * bg.R() * bg.R() / (8.0 * bg.m()))),
      tau_horizon_(tau_scale_ * (theta_h_ + std::sin(theta_h_))) {}

double FreeFallWorldline::tau_of_theta(double theta) const {
    return tau_scale_ * (theta + std::sin(theta));
}

double FreeFallWorldline::theta_of_tau(double tau) const {
    if (!(tau >= 0.0)) throw DomainError("theta_of_tau: tau must be >= 0");
    if (!(tau < tau_horizon_)) throw DomainError("theta_of_tau: tau at or beyond horizon crossing");
    if (tau == 0.0) return 0.0;
    // theta <= theta + sin(theta) <= 2 theta on [0, pi] brackets the root;
    // the lower end is pulled in so rounding cannot put it past the root.
    const double lo = 0.9 * tau / (2.0 * tau_scale_);
    const double hi = std::min(theta_h_, tau / tau_scale_);
    auto residual = [&](double theta) { return tau_of_theta(theta) - tau; };
    return find_root(residual, lo, hi, 0.0);
}

WorldlinePoint FreeFallWorldline::at_theta(double theta) const {
    if (!(theta >= 0.0) || !(theta < theta_h_)) throw DomainError("freefall: theta must lie in [0, theta_H)");
    return at_theta_with_tau(theta, tau_of_theta(theta));
}

WorldlinePoint FreeFallWorldline::at_theta_with_tau(double theta, double tau) const {
    const double m = bg_.m();
    const double R = bg_.R();
    const double f = bg_.redshift();
    const double half = 0.5 * theta;
    const double s = std::sin(half);

    const double space = R * s * s / f;

    // t' = (1-2m/R) sqrt(R^3/2m) [ (theta + sin theta)/2 + (2m/R) theta ]
    //      + sqrt(1-2m/R) 2m log[(tan(theta_H/2) + tan(theta/2)) / (tan(theta_H/2) - tan(theta/2))]
    const double tan_h = std::sqrt(R / (2.0 * m) - 1.0);
    const double tan_t = std::tan(half);
    const double cycloid = f * f * std::sqrt(R * R * R / (2.0 * m)) *
                           (0.5 * (theta + std::sin(theta)) + 2.0 * m / R * theta);
    const double horizon_log = f * 2.0 * m * std::log1p(2.0 * tan_t / (tan_h - tan_t));

    // t' - tau regrouped so that every term is non-negative and O(theta^3):
    //   (2m/R) s (theta - sin theta)
    //   + 4 m f [ (atanh(u) - u) + (t - atan t) / tan(theta_H/2) ],  u = t / tan(theta_H/2)
    const double u = tan_t / tan_h;
    const double lag = 2.0 * m / R * tau_scale_ * x_minus_sin(theta) +
                       4.0 * m * f * (atanh_minus_x(u) + x_minus_atan(tan_t) / tan_h);
    // theta is the rounded inverse of tau; shift to tau at first order. The
    // lag only sees the shift through 1 - dt'/dtau, which is small.
    const double r = R - f * space;
    const double shift = tau - tau_of_theta(theta);
    const double rate_excess = 2.0 * m / R * (R - r) / (r - 2.0 * m);  // dt'/dtau - 1
    const double speed = std::sqrt(2.0 * m / r - 2.0 * m / R) / f;  // dr'/dtau
    return {tau, space + speed * shift, cycloid + horizon_log + (1.0 + rate_excess) * shift,
            lag + rate_excess * shift};
}

double FreeFallWorldline::transit_time(double L) const {
    bg_.require_cavity_fits(L);
    if (L == 0.0) return 0.0;
    const double theta = 2.0 * std::asin(std::sqrt(L * bg_.redshift() / bg_.R()));
    return tau_of_theta(theta);
}

RindlerWorldline::RindlerWorldline(double a) : a_(a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("rindler: acceleration must be > 0");
}

WorldlinePoint RindlerWorldline::at(double tau) const {
    const double sh = std::sinh(0.5 * a_ * tau);
    // cosh(a tau) - 1 = 2 sinh^2(a tau / 2), free of cancellation.
    const double x = a_ * tau;
    // sinh(x) - x, by its series where the difference would cancel.
    double excess;
    if (std::abs(x) < 0.1) {
        const double x2 = x * x;
        excess = x * x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0 * (1.0 + x2 / 110.0))));
    } else {
        excess = std::sinh(x) - x;
    }
    return {tau, 2.0 * sh * sh / a_, std::sinh(x) / a_, excess / a_};
}

double RindlerWorldline::transit_time(double L) const {
    if (!(L >= 0.0)) throw DomainError("rindler: cavity length must be >= 0");
    // arccosh(1 + eps) = log1p(eps + sqrt(eps (2 + eps))), accurate for small eps.
    const double eps = a_ * L;
    return std::log1p(eps + std::sqrt(eps * (2.0 + eps))) / a_;
}

WorldlinePoint position(const Worldline& wl, double tau) {
    return std::visit([tau](const auto& w) { return w.at(tau); }, wl);
}

double transit_time(const Worldline& wl, double L) {
    return std::visit([L](const auto& w) { return w.transit_time(L); }, wl);
}

double theta_of_tau(double tau, const FreeFallWorldline& wl) { return wl.theta_of_tau(tau); }
WorldlinePoint freefall_position(double tau, const FreeFallWorldline& wl) { return wl.at(tau); }
WorldlinePoint rindler_position(double tau, const RindlerWorldline& wl) { return wl.at(tau); }

double transit_time_schwarzschild(const SchwarzschildBackground& bg, double L) {
    return FreeFallWorldline(bg).transit_time(L);
}

double transit_time_rindler(double a, double L) { return RindlerWorldline(a).transit_time(L); }

std::string_view to_string(Anchor anchor) { return anchor == Anchor::entrance ? "entrance" : "middle"; }

Anchor parse_anchor(std::string_view text) {
    if (text == "entrance") return Anchor::entrance;
    if (text == "middle") return Anchor::middle;
    throw DomainError("anchor must be 'entrance' or 'middle', got '" + std::string(text) + "'");
}

double static_acceleration(double m, double r) {
    if (!(r > 2.0 * m)) throw DomainError("static acceleration: r must exceed 2m");
    return m / (r * r * std::sqrt(1.0 - 2.0 * m / r));
}

double matched_acceleration(const SchwarzschildBackground& bg, double L, Anchor anchor) {
    bg.require_cavity_fits(L);
    const double r = anchor == Anchor::entrance ? bg.R() : bg.radius_at_depth(0.5 * L);
    return static_acceleration(bg.m(), r);
}

}  // namespace cavity

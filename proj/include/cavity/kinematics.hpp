#pragma once

#include <functional>
#include <string_view>
#include <utility>
#include <variant>

namespace cavity {

/// Black hole mass and the areal radius of the cavity entrance, G = c = 1.
class SchwarzschildBackground {
  public:
    /// Throws DomainError unless m > 0 and R > 2m.
    SchwarzschildBackground(double m, double R);

    double m() const noexcept { return m_; }
    double R() const noexcept { return R_; }
    /// sqrt(1 - 2m/R): converts cavity-frame lengths to coordinate lengths and
    /// asymptotic time to the entrance wall's proper time.
    double redshift() const noexcept { return redshift_; }

    /// Areal radius of the cavity point at proper depth r' below the entrance.
    double radius_at_depth(double depth) const noexcept { return R_ - redshift_ * depth; }
    /// True when a cavity of proper length L placed at R ends outside the horizon.
    bool cavity_fits(double L) const noexcept { return L >= 0.0 && radius_at_depth(L) > 2.0 * m_; }
    /// Throws DomainError if the cavity reaches or crosses the horizon.
    void require_cavity_fits(double L) const;

  private:
    double m_;
    double R_;
    double redshift_;
};

/// A sample of a worldline in cavity-frame coordinates.
struct WorldlinePoint {
    double tau = 0.0;    // detector proper time
    double space = 0.0;  // r' (Schwarzschild) or x (Rindler)
    double time = 0.0;   // t' (Schwarzschild) or t (Rindler)
    double lag = 0.0;    // time - tau, evaluated without cancellation
};

/// Maps asymptotic-frame (r, t) to the entrance wall's rest frame (r', t').
std::pair<double, double> frame_transform(double r, double t, const SchwarzschildBackground& bg);

/// Radial free fall from rest at the cavity entrance, parametrized by the
/// cycloid angle theta: r = R cos^2(theta/2), tau = sqrt(R^3/8m)(theta + sin theta).
class FreeFallWorldline {
  public:
    explicit FreeFallWorldline(SchwarzschildBackground bg);

    const SchwarzschildBackground& background() const noexcept { return bg_; }
    double theta_horizon() const noexcept { return theta_h_; }

    /// Proper time elapsed when the cycloid angle reaches theta.
    double tau_of_theta(double theta) const;
    /// Inverse of tau_of_theta by bracketed root finding on [0, theta_H].
    double theta_of_tau(double tau) const;

    WorldlinePoint at_theta(double theta) const;
    WorldlinePoint at(double tau) const { return at_theta_with_tau(theta_of_tau(tau), tau); }

    /// Proper time to cross a cavity of proper length L.
    double transit_time(double L) const;

  private:
    WorldlinePoint at_theta_with_tau(double theta, double tau) const;

    SchwarzschildBackground bg_;
    double theta_h_;
    double tau_scale_;  // sqrt(R^3 / 8m)
    double tau_horizon_;
};

/// Uniform proper acceleration a from rest at x = 0, t = 0 in an inertial cavity.
class RindlerWorldline {
  public:
    /// Throws DomainError unless a > 0.
    explicit RindlerWorldline(double a);

    double acceleration() const noexcept { return a_; }
    WorldlinePoint at(double tau) const;
    double transit_time(double L) const;

  private:
    double a_;
};

using Worldline = std::variant<FreeFallWorldline, RindlerWorldline>;

WorldlinePoint position(const Worldline& wl, double tau);
double transit_time(const Worldline& wl, double L);

/// Convenience wrappers matching the free-function vocabulary used elsewhere.
double theta_of_tau(double tau, const FreeFallWorldline& wl);
WorldlinePoint freefall_position(double tau, const FreeFallWorldline& wl);
WorldlinePoint rindler_position(double tau, const RindlerWorldline& wl);
double transit_time_schwarzschild(const SchwarzschildBackground& bg, double L);
double transit_time_rindler(double a, double L);

enum class Anchor { entrance, middle };

std::string_view to_string(Anchor anchor);
Anchor parse_anchor(std::string_view text);

/// Proper acceleration of a static observer at areal radius r: m / (r^2 sqrt(1 - 2m/r)).
double static_acceleration(double m, double r);

/// Rindler acceleration matched to the local field strength at the cavity
/// entrance, or at its proper midpoint r' = L/2.
double matched_acceleration(const SchwarzschildBackground& bg, double L, Anchor anchor);

}  // namespace cavity

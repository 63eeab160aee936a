#pragma once

namespace cavity {

/// Regge-Wheeler tortoise coordinate r* = r + 2m ln(r/2m - 1). Requires r > 2m.
double tortoise(double r, double m);

struct EstimatorReport {
    double ratio = 0.0;  // L*/L, the cavity's tortoise extent over its proper length
    double R = 0.0;
    double L = 0.0;
    double m = 0.0;
};

/// Quasi-local validity estimator L*/L = [r*(R) - r*(R - sqrt(1-2m/R) L)] / L.
/// Values close to 1 mean the flat-cavity mode approximation is trustworthy.
/// Throws DomainError if the cavity reaches the horizon or L <= 0.
EstimatorReport estimator(double R, double L, double m);

/// Closed form of the same ratio:
///   sqrt(1-2m/R) + (2m/L) ln[ sqrt(R^2-2mR) / (sqrt(R^2-2mR) - L) ].
/// Evaluated with log1p so it stays accurate for L much smaller than R.
double estimator_closed_form(double R, double L, double m);

/// Default ratio above which sweep rows are flagged as outside the
/// quasi-local regime.
inline constexpr double kDefaultValidityThreshold = 1.03;

}  // namespace cavity

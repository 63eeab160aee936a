#include "cavity/numerics.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace cavity {

double find_root(const RealFn& g, double lo, double hi, double tol) {
    if (std::isnan(lo) || std::isnan(hi) || !(tol >= 0.0))
        throw DomainError("find_root: invalid bracket or tolerance");
    if (lo > hi) std::swap(lo, hi);

    double a = lo, b = hi;
    double fa = g(a), fb = g(b);
    if (std::isnan(fa) || std::isnan(fb)) throw DomainError("find_root: function is NaN at bracket end");
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) throw DomainError("find_root: root not bracketed (same sign at both ends)");

    constexpr double eps = std::numeric_limits<double>::epsilon();
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 0; iter < 1000; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol1 || fb == 0.0) return b;

        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // Secant or inverse quadratic interpolation.
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0)
                q = -q;
            else
                p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (m > 0.0 ? tol1 : -tol1);
        fb = g(b);
        if (std::isnan(fb)) throw DomainError("find_root: function returned NaN inside bracket");
    }
    return b;
}

}  // namespace cavity

#include "cavity/kinematics.hpp"
#include "cavity/numerics.hpp"
#include "cavity/validity.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cavity;

TEST_SUITE("validity") {

TEST_CASE("tortoise coordinate") {
    CHECK(tortoise(4.0, 1.0) == doctest::Approx(4.0));  // ln(4/2 - 1) = 0
    CHECK(tortoise(10.0, 1.0) == doctest::Approx(10.0 + 2.0 * std::log(4.0)));
    CHECK_THROWS_AS(tortoise(2.0, 1.0), DomainError);
    CHECK_THROWS_AS(tortoise(3.0, 0.0), DomainError);
}

TEST_CASE("estimator reference values") {
    CHECK(estimator(10.0, 2.0, 1.0).ratio == doctest::Approx(1.1475233741994826).epsilon(1e-14));
    CHECK(std::abs(estimator(10.0, 2.0, 1.0).ratio - 1.1475) < 1e-3);
    CHECK(std::abs(estimator(40.0, 6.0, 1.0).ratio - 1.030) < 1e-3);
    const EstimatorReport rep = estimator(10.0, 2.0, 1.0);
    CHECK(rep.R == 10.0);
    CHECK(rep.L == 2.0);
    CHECK(rep.m == 1.0);
}

TEST_CASE("estimator domain") {
    CHECK_THROWS_AS(estimator(10.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(estimator(10.0, 9.0, 1.0), DomainError);
    CHECK_THROWS_AS(estimator(1.5, 0.1, 1.0), DomainError);
    CHECK_THROWS_AS(estimator_closed_form(10.0, 9.0, 1.0), DomainError);
}

TEST_CASE("closed form matches the tortoise difference") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 200) {
        const double m = 0.1 + 5.0 * u(rng);
        const double R = 2.0 * m * (1.0 + std::pow(1e3, u(rng)) * 0.01);
        const double L = std::pow(10.0, -4.0 + 5.0 * u(rng)) * m;
        if (!SchwarzschildBackground(m, R).cavity_fits(L)) continue;
        CHECK(estimator_closed_form(R, L, m) == doctest::Approx(estimator(R, L, m).ratio).epsilon(1e-11));
        ++checked;
    }
}

TEST_CASE("estimator exceeds one and approaches it far away or for small cavities") {
    CHECK(estimator(1e6, 1.0, 1.0).ratio == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(estimator(10.0, 1e-6, 1.0).ratio == doctest::Approx(1.0 / std::sqrt(0.8)).epsilon(1e-6));
    for (double R : {3.0, 5.0, 10.0, 40.0})
        for (double L : {1e-3, 0.5, 1.0})
            if (SchwarzschildBackground(1.0, R).cavity_fits(L)) CHECK(estimator(R, L, 1.0).ratio >= 1.0);
}

TEST_CASE("estimator is monotone: decreasing in R, increasing in L") {
    for (double L : {0.5, 2.0, 6.0}) {
        double prev = estimator(10.0, L, 1.0).ratio;
        for (double R = 12.0; R < 200.0; R *= 1.2) {
            const double cur = estimator(R, L, 1.0).ratio;
            CHECK(cur < prev);
            prev = cur;
        }
    }
    for (double R : {10.0, 40.0}) {
        double prev = estimator(R, 0.01, 1.0).ratio;
        for (double L = 0.02; L < 6.0; L *= 1.3) {
            const double cur = estimator(R, L, 1.0).ratio;
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("estimator is scale invariant") {
    for (double s : {0.25, 3.0, 1e3})
        CHECK(estimator(s * 10.0, s * 2.0, s).ratio == doctest::Approx(estimator(10.0, 2.0, 1.0).ratio).epsilon(1e-13));
}

}  // TEST_SUITE

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "twostage/numeric.hpp"

using namespace twostage;
using namespace twostage::numeric;

namespace {

// Phi2(x, y; rho) = int_{-inf}^{x} phi(t) Phi((y - rho t) / sqrt(1 - rho^2)) dt, composite Simpson.
double bvn_by_quadrature(double x, double y, double rho) {
    const double lo = -12.0;
    const int n = 200000;
    const double h = (x - lo) / n;
    const double s = std::sqrt(1.0 - rho * rho);
    auto g = [&](double t) { return normal_pdf(t) * normal_cdf((y - rho * t) / s); };
    double acc = g(lo) + g(x);
    for (int i = 1; i < n; ++i) acc += g(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("standard normal quantile matches reference values") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-13));
    CHECK(std::isinf(normal_quantile(0.0)));
    CHECK_THROWS_AS(normal_quantile(1.5), std::domain_error);
}

TEST_CASE("normal cdf and quantile round trip to 1e-12 relative") {
    for (double p : {1e-300, 1e-100, 1e-20, 1e-8, 1e-3, 0.02, 0.1, 0.3, 0.5, 0.77, 0.9, 0.999}) {
        const double x = normal_quantile(p);
        CHECK(std::abs(normal_cdf(x) - p) <= 1e-12 * p);
    }
    for (double x : {-30.0, -8.0, -1.0, 0.0, 2.5, 4.0}) {
        CHECK(std::abs(normal_quantile(normal_cdf(x)) - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
    CHECK(normal_sf(30.0) > 0.0);
    CHECK(normal_sf(1.0) == doctest::Approx(1.0 - normal_cdf(1.0)).epsilon(1e-15));
}

TEST_CASE("bivariate normal cdf at the origin has the closed form 1/4 + asin(rho)/(2 pi)") {
    for (double rho : {-0.999, -0.95, -0.8, -0.5, -0.2, 0.0, 0.1, 0.29, 0.31, 0.74, 0.76, 0.92, 0.93, 0.99}) {
        const double exact = 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
        CHECK(std::abs(bivariate_normal_cdf(0.0, 0.0, rho) - exact) <= 1e-14);
    }
}

TEST_CASE("bivariate normal cdf agrees with one-dimensional quadrature to 1e-10") {
    const std::vector<double> pts = {-2.7, -1.1, -0.3, 0.4, 1.6, 3.2};
    for (double rho : {-0.95, -0.6, -0.1, 0.25, 0.5, 0.8, 0.97}) {
        for (double x : pts) {
            for (double y : pts) {
                CHECK(std::abs(bivariate_normal_cdf(x, y, rho) - bvn_by_quadrature(x, y, rho)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("bivariate normal cdf limits") {
    CHECK(bivariate_normal_cdf(-INFINITY, 0.3, 0.4) == 0.0);
    CHECK(bivariate_normal_cdf(INFINITY, 0.3, 0.4) == doctest::Approx(normal_cdf(0.3)));
    CHECK(bivariate_normal_cdf(1.0, 2.0, 0.0) == doctest::Approx(normal_cdf(1.0) * normal_cdf(2.0)).epsilon(1e-14));
    CHECK(bivariate_normal_cdf(0.7, 0.7, 1.0) == doctest::Approx(normal_cdf(0.7)).epsilon(1e-12));
    CHECK_THROWS_AS(bivariate_normal_cdf(0.0, 0.0, 1.5), std::domain_error);
}

TEST_CASE("gamma quantile inverts the gamma cdf with shape 3 rate 4") {
    for (double p : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
        CHECK(gamma_cdf(gamma_quantile(p, 3.0, 4.0), 3.0, 4.0) == doctest::Approx(p).epsilon(1e-12));
    }
    // Median of Gamma(3, rate 4): qgamma(0.5, 3, 4) = 0.66851508...
    CHECK(gamma_quantile(0.5, 3.0, 4.0) == doctest::Approx(0.6685150784308898).epsilon(1e-12));
}

TEST_CASE("bisection finds the root of a monotone function") {
    const auto r = bisect_increasing([](double x) { return x * x * x; }, 0.125, 0.0, 1.0, 1e-15, 0.0);
    CHECK(r.x == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(bisect_increasing([](double x) { return x; }, -1.0, 0.0, 1.0, 1e-12, 0.0).x == 0.0);
    CHECK(bisect_increasing([](double x) { return x; }, 2.0, 0.0, 1.0, 1e-12, 0.0).x == 1.0);
}

TEST_CASE("brent minimizer locates interior minima") {
    const auto r = brent_minimize([](double x) { return (x - 0.3) * (x - 0.3) + 1.0; }, -2.0, 5.0, 1e-10);
    CHECK(r.converged);
    CHECK(r.x == doctest::Approx(0.3).epsilon(1e-8));
    const auto c = brent_minimize([](double x) { return std::cos(x); }, 2.0, 4.0, 1e-10);
    CHECK(c.x == doctest::Approx(std::numbers::pi).epsilon(1e-8));
}

TEST_CASE("rng is deterministic and produces open-interval uniforms") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    KahanSum sum;
    for (int i = 0; i < 100000; ++i) {
        const double x = a.uniform();
        CHECK_FALSE((x <= 0.0 || x >= 1.0));
        CHECK(x == b.uniform());
        if (x != c.uniform()) differs = true;
        sum.add(x);
    }
    CHECK(differs);
    CHECK(sum.value() / 100000 == doctest::Approx(0.5).epsilon(0.01));
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 7) == derive_seed(1, 7));
}

TEST_CASE("kahan sum compensates for lost low-order bits") {
    KahanSum s;
    s.add(1.0);
    for (int i = 0; i < 1000000; ++i) s.add(1e-16);
    CHECK(s.value() == doctest::Approx(1.0 + 1e-10).epsilon(1e-15));
}

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace twostage {

/// Raised when an iterative numerical routine fails to reach its tolerance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace numeric {

double normal_pdf(double x);
double normal_cdf(double x);
/// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x);
/// Inverse of the standard normal CDF (Wichura AS241, ~1e-16 relative).
double normal_quantile(double p);

/// P(X <= x, Y <= y) for a standard bivariate normal with correlation rho.
/// Genz's adaptation of the Drezner-Wesolowsky method; absolute error < 1e-15.
double bivariate_normal_cdf(double x, double y, double rho);

/// Regularized lower incomplete gamma inverse, shape/rate parameterization.
double gamma_quantile(double p, double shape, double rate);
double gamma_cdf(double x, double shape, double rate);

struct BisectResult {
    double x;
    int iterations;
};

/// Finds x in [lo, hi] with f(x) = target for nondecreasing f. Stops when the
/// bracket is narrower than xtol or |f(x) - target| <= ftol.
BisectResult bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                               double hi, double xtol, double ftol, int max_iter = 400);

struct MinimizeResult {
    double x;
    double fx;
    int iterations;
    bool converged;
};

/// Brent's derivative-free minimizer (golden section + parabolic steps) on [lo, hi].
MinimizeResult brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                              double xtol = 1e-9, int max_iter = 500);

/// Kahan-compensated running sum.
class KahanSum {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace numeric

/// SplitMix64: used for seeding and seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for stream `index` derived from a base seed; independent of thread schedule.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// xoshiro256** generator. Output is identical on every platform, unlike the
/// std:: distributions, so all sampling goes through uniform().
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform on the open interval (0, 1).
    double uniform();

private:
    std::uint64_t s_[4];
};

}  // namespace twostage

#include "twostage/numeric.hpp"

#include <cmath>
#include <utility>

namespace twostage {

namespace numeric {

BisectResult bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                               double hi, double xtol, double ftol, int max_iter) {
    if (!(lo <= hi)) throw std::domain_error("bisect_increasing: empty bracket");
    const double flo = f(lo) - target;
    if (flo >= 0.0) return {lo, 0};
    const double fhi = f(hi) - target;
    if (fhi <= 0.0) return {hi, 0};
    for (int it = 1; it <= max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid) - target;
        if (std::abs(fm) <= ftol || 0.5 * (hi - lo) <= xtol) return {mid, it};
        if (fm < 0.0)
            lo = mid;
        else
            hi = mid;
        if (mid == lo && mid == hi) return {mid, it};
    }
    throw NumericError("bisection did not converge within the iteration cap");
}

// Brent (1973), "Algorithms for Minimization without Derivatives", procedure localmin.
MinimizeResult brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                              double xtol, int max_iter) {
    constexpr double kGolden = 0.3819660112501051;
    constexpr double kEps = 1.4901161193847656e-08;  // sqrt(DBL_EPSILON)
    double a = lo, b = hi;
    double x = a + kGolden * (b - a);
    double w = x, v = x;
    double fx = f(x);
    double fw = fx, fv = fx;
    double d = 0.0, e = 0.0;

    for (int it = 1; it <= max_iter; ++it) {
        const double m = 0.5 * (a + b);
        const double tol = kEps * std::abs(x) + xtol / 3.0;
        const double t2 = 2.0 * tol;
        if (std::abs(x - m) <= t2 - 0.5 * (b - a)) return {x, fx, it, true};

        double p = 0.0, q = 0.0, r = 0.0;
        if (std::abs(e) > tol) {
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0)
                p = -p;
            else
                q = -q;
            r = e;
            e = d;
        }
        if (std::abs(p) < std::abs(0.5 * q * r) && p > q * (a - x) && p < q * (b - x)) {
            d = p / q;
            const double u = x + d;
            if (u - a < t2 || b - u < t2) d = x < m ? tol : -tol;
        } else {
            e = (x < m ? b : a) - x;
            d = kGolden * e;
        }
        const double u = x + (std::abs(d) >= tol ? d : (d > 0.0 ? tol : -tol));
        const double fu = f(u);
        if (fu <= fx) {
            if (u < x)
                b = x;
            else
                a = x;
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if (u < x)
                a = u;
            else
                b = u;
            if (fu <= fw || w == x) {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u;
                fv = fu;
            }
        }
    }
    return {x, fx, max_iter, false};
}

}  // namespace numeric

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base;
    const std::uint64_t mixed = splitmix64(s);
    s = mixed ^ (index * 0xD1B54A32D192ED03ULL);
    return splitmix64(s);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : s_) word = splitmix64(s);
}

std::uint64_t Rng::next() {
    const auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    // 53 random bits, shifted by half an ulp so 0 is never produced.
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace twostage

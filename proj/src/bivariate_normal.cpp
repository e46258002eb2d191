#include "twostage/numeric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace twostage::numeric {

namespace {

// Gauss-Legendre half-rules (nodes on (0,1], weights) for 6, 12 and 20 points.
constexpr std::array<double, 3> kW6 = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr std::array<double, 3> kX6 = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr std::array<double, 6> kW12 = {0.04717533638651177, 0.1069393259953183,
                                        0.1600783285433464,  0.2031674267230659,
                                        0.2334925365383547,  0.2491470458134029};
constexpr std::array<double, 6> kX12 = {0.9815606342467191, 0.9041172563704750,
                                        0.7699026741943050, 0.5873179542866171,
                                        0.3678314989981802, 0.1252334085114692};
constexpr std::array<double, 10> kW20 = {0.01761400713915212, 0.04060142980038694,
                                         0.06267204833410906, 0.08327674157670475,
                                         0.1019301198172404,  0.1181945319615184,
                                         0.1316886384491766,  0.1420961093183821,
                                         0.1491729864726037,  0.1527533871307259};
constexpr std::array<double, 10> kX20 = {0.9931285991850949,  0.9639719272779138,
                                         0.9122344282513259,  0.8391169718222188,
                                         0.7463319064601508,  0.6360536807265150,
                                         0.5108670019508271,  0.3737060887154196,
                                         0.2277858511416451,  0.07652652113349733};

// P(X > h, Y > k) with correlation r (Genz, "Numerical computation of rectangular
// bivariate and trivariate normal and t probabilities", 2004).
template <std::size_t N>
double upper_orthant(double h, double k, double r, const std::array<double, N>& w,
                     const std::array<double, N>& x) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = 0.5 * std::asin(r);
        for (std::size_t i = 0; i < N; ++i) {
            for (double node : {1.0 - x[i], 1.0 + x[i]}) {
                const double sn = std::sin(asr * node);
                bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / kTwoPi + normal_sf(h) * normal_sf(k);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (std::abs(r) < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 80.0;
        double asr = -0.5 * (bs / as + hk);
        if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
        if (hk > -100.0) {
            const double b = std::sqrt(bs);
            const double sp = std::sqrt(kTwoPi) * normal_cdf(-b / a);
            bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
        }
        a *= 0.5;
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            for (double node : {1.0 - x[i], 1.0 + x[i]}) {
                const double xs = (a * node) * (a * node);
                asr = -0.5 * (bs / xs + hk);
                if (asr <= -100.0) continue;
                const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                const double rs = std::sqrt(1.0 - xs);
                const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                acc += w[i] * std::exp(asr) * (sp - ep);
            }
        }
        bvn = (a * acc - bvn) / kTwoPi;
    }
    if (r > 0.0) return bvn + normal_sf(std::max(h, k));
    if (h >= k) return -bvn;
    const double l = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_sf(h) - normal_sf(k);
    return l - bvn;
}

}  // namespace

double bivariate_normal_cdf(double x, double y, double rho) {
    if (std::isnan(x) || std::isnan(y) || !(rho >= -1.0 && rho <= 1.0))
        throw std::domain_error("bivariate_normal_cdf: invalid argument");
    if (x == -INFINITY || y == -INFINITY) return 0.0;
    if (x == INFINITY) return normal_cdf(y);
    if (y == INFINITY) return normal_cdf(x);
    const double h = -x;
    const double k = -y;
    double p;
    const double ar = std::abs(rho);
    if (ar < 0.3)
        p = upper_orthant(h, k, rho, kW6, kX6);
    else if (ar < 0.75)
        p = upper_orthant(h, k, rho, kW12, kX12);
    else
        p = upper_orthant(h, k, rho, kW20, kX20);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace twostage::numeric

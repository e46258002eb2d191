#include "twostage/copula.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "twostage/numeric.hpp"

namespace twostage {

namespace {

using numeric::normal_cdf;
using numeric::normal_quantile;

[[noreturn]] void domain(const std::string& what) { throw std::domain_error(what); }

// log(u^-theta + v^-theta - 1) given a = -theta*log(u), b = -theta*log(v), both >= 0.
double clayton_log_sum(double a, double b) {
    const double m = std::max(a, b);
    if (m < 30.0) return std::log1p(std::expm1(a) + std::expm1(b));
    return m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
}

// (x^theta + y^theta)^(1/theta) for x, y >= 0 without overflow.
double gumbel_norm(double x, double y, double theta) {
    const double hi = std::max(x, y);
    const double lo = std::min(x, y);
    if (hi == 0.0) return 0.0;
    return hi * std::pow(1.0 + std::pow(lo / hi, theta), 1.0 / theta);
}

// ---- base (unrotated) families -------------------------------------------------

double base_cdf(Family f, double th, double u, double v) {
    switch (f) {
        case Family::Independence:
            return u * v;
        case Family::Gaussian:
            return numeric::bivariate_normal_cdf(normal_quantile(u), normal_quantile(v), th);
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double d = std::expm1(-th);
            return -std::log1p(a * b / d) / th;
        }
        case Family::Clayton: {
            const double ls = clayton_log_sum(-th * std::log(u), -th * std::log(v));
            return std::exp(-ls / th);
        }
        case Family::Gumbel: {
            const double a = gumbel_norm(-std::log(u), -std::log(v), th);
            return std::exp(-a);
        }
        case Family::Joe: {
            const double a = std::pow(1.0 - u, th);
            const double b = std::pow(1.0 - v, th);
            return 1.0 - std::pow(a + b - a * b, 1.0 / th);
        }
    }
    return 0.0;
}

double base_log_density(Family f, double th, double u, double v) {
    switch (f) {
        case Family::Independence:
            return 0.0;
        case Family::Gaussian: {
            const double x = normal_quantile(u);
            const double y = normal_quantile(v);
            const double om = 1.0 - th * th;
            return -0.5 * std::log(om) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * om);
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double d = std::expm1(-th);
            const double den = d + a * b;
            return std::log(-th * d) - th * (u + v) - 2.0 * std::log(std::abs(den));
        }
        case Family::Clayton: {
            const double lu = std::log(u);
            const double lv = std::log(v);
            const double ls = clayton_log_sum(-th * lu, -th * lv);
            return std::log1p(th) - (th + 1.0) * (lu + lv) - (1.0 / th + 2.0) * ls;
        }
        case Family::Gumbel: {
            const double x = -std::log(u);
            const double y = -std::log(v);
            const double a = gumbel_norm(x, y, th);
            return -a + x + y + (th - 1.0) * (std::log(x) + std::log(y)) +
                   (1.0 - 2.0 * th) * std::log(a) + std::log(a + th - 1.0);
        }
        case Family::Joe: {
            const double ub = 1.0 - u;
            const double vb = 1.0 - v;
            const double a = std::pow(ub, th);
            const double b = std::pow(vb, th);
            const double s = a + b - a * b;
            return (1.0 / th - 2.0) * std::log(s) + (th - 1.0) * (std::log(ub) + std::log(vb)) +
                   std::log(th - 1.0 + s);
        }
    }
    return 0.0;
}

// C(v | u) for the base family, u in (0,1), v in (0,1).
double base_h(Family f, double th, double v, double u) {
    switch (f) {
        case Family::Independence:
            return v;
        case Family::Gaussian: {
            const double x = normal_quantile(u);
            const double y = normal_quantile(v);
            return normal_cdf((y - th * x) / std::sqrt(1.0 - th * th));
        }
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double b = std::expm1(-th * v);
            const double d = std::expm1(-th);
            return std::exp(-th * u) * b / (d + a * b);
        }
        case Family::Clayton: {
            const double lu = std::log(u);
            const double ls = clayton_log_sum(-th * lu, -th * std::log(v));
            return std::exp(-(th + 1.0) * lu - (1.0 / th + 1.0) * ls);
        }
        case Family::Gumbel: {
            const double x = -std::log(u);
            const double a = gumbel_norm(x, -std::log(v), th);
            return std::exp(-a + x + (th - 1.0) * (std::log(x) - std::log(a)));
        }
        case Family::Joe: {
            const double ub = 1.0 - u;
            const double a = std::pow(ub, th);
            const double b = std::pow(1.0 - v, th);
            const double s = a + b - a * b;
            return std::pow(ub, th - 1.0) * (1.0 - b) * std::pow(s, 1.0 / th - 1.0);
        }
    }
    return 0.0;
}

double base_h_inverse(Family f, double th, double w, double u) {
    if (w <= 0.0) return 0.0;
    if (w >= 1.0) return 1.0;
    switch (f) {
        case Family::Independence:
            return w;
        case Family::Gaussian:
            return normal_cdf(th * normal_quantile(u) + std::sqrt(1.0 - th * th) * normal_quantile(w));
        case Family::Frank: {
            const double a = std::expm1(-th * u);
            const double d = std::expm1(-th);
            const double b = w * d / (std::exp(-th * u) - w * a);
            return std::clamp(-std::log1p(b) / th, 0.0, 1.0);
        }
        case Family::Clayton: {
            // v = ((w^(-th/(1+th)) - 1) u^(-th) + 1)^(-1/th), evaluated in logs.
            const double a = std::expm1(-th / (1.0 + th) * std::log(w));
            if (a <= 0.0) return 1.0;
            const double log_ab = std::log(a) - th * std::log(u);
            const double log_t = log_ab > 30.0 ? log_ab + std::log1p(std::exp(-log_ab))
                                               : std::log1p(std::exp(log_ab));
            return std::exp(-log_t / th);
        }
        case Family::Gumbel:
        case Family::Joe: {
            const auto h = [&](double v) {
                if (v <= 0.0) return 0.0;
                if (v >= 1.0) return 1.0;
                return base_h(f, th, v, u);
            };
            return numeric::bisect_increasing(h, w, 0.0, 1.0, 1e-16, 1e-13, 200).x;
        }
    }
    return w;
}

// D1(x) = (1/x) * int_0^x t / (e^t - 1) dt for x > 0, by panelled Gauss-Legendre.
double debye1(double x) {
    static constexpr std::array<double, 5> nodes = {0.1488743389816312, 0.4333953941292472,
                                                    0.6794095682990244, 0.8650633666889845,
                                                    0.9739065285171717};
    static constexpr std::array<double, 5> weights = {0.2955242247147529, 0.2692667193099963,
                                                      0.2190863625159820, 0.1494513491505806,
                                                      0.0666713443086881};
    const auto g = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    const int panels = std::max(1, static_cast<int>(std::ceil(x)));
    const double width = x / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * width;
        const double half = 0.5 * width;
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            s += weights[i] * (g(mid - half * nodes[i]) + g(mid + half * nodes[i]));
        total += s * half;
    }
    return total / x;
}

double frank_tau(double th) {
    const double x = std::abs(th);
    double tau;
    if (x < 1e-2) {
        const double x2 = x * x;
        tau = x / 9.0 - x * x2 / 900.0 + x * x2 * x2 / 52920.0;
    } else {
        tau = 1.0 - 4.0 / x * (1.0 - debye1(x));
    }
    return th < 0.0 ? -tau : tau;
}

// tau = 1 - 4 sum_k 1 / (k (th k + 2) (th (k-1) + 2)), with an asymptotic tail.
double joe_tau(double th) {
    constexpr int kTerms = 20000;
    double s = 0.0;
    for (int k = kTerms; k >= 1; --k) {
        const double kk = k;
        s += 1.0 / (kk * (th * kk + 2.0) * (th * (kk - 1.0) + 2.0));
    }
    // Tail of sum_{k>N} 1/(th^2 k^3) ~ 1/(2 th^2 N^2).
    s += 1.0 / (2.0 * th * th * kTerms * static_cast<double>(kTerms));
    return 1.0 - 4.0 * s;
}

void check_unit_closed(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0)) domain(std::string(what) + " outside [0,1]");
}

void check_unit_open(double x, const char* what) {
    if (!(x > 0.0 && x < 1.0)) domain(std::string(what) + " outside (0,1)");
}

}  // namespace

std::string to_string(Family f) {
    switch (f) {
        case Family::Independence: return "Independence";
        case Family::Gaussian: return "Gaussian";
        case Family::Frank: return "Frank";
        case Family::Clayton: return "Clayton";
        case Family::Gumbel: return "Gumbel";
        case Family::Joe: return "Joe";
    }
    return "?";
}

std::string to_string(Rotation r) {
    switch (r) {
        case Rotation::None: return "R0";
        case Rotation::R90: return "R90";
        case Rotation::R180: return "R180";
        case Rotation::R270: return "R270";
    }
    return "?";
}

Family parse_family(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "independence" || s == "indep") return Family::Independence;
    if (s == "gaussian" || s == "normal") return Family::Gaussian;
    if (s == "frank") return Family::Frank;
    if (s == "clayton") return Family::Clayton;
    if (s == "gumbel") return Family::Gumbel;
    if (s == "joe") return Family::Joe;
    throw std::invalid_argument("unknown copula family '" + std::string(name) + "'");
}

Rotation parse_rotation(std::string_view name) {
    if (name == "R0" || name == "0" || name == "none" || name.empty()) return Rotation::None;
    if (name == "R90" || name == "90") return Rotation::R90;
    if (name == "R180" || name == "180") return Rotation::R180;
    if (name == "R270" || name == "270") return Rotation::R270;
    throw std::invalid_argument("unknown rotation '" + std::string(name) + "'");
}

bool is_rotatable(Family f) {
    return f == Family::Clayton || f == Family::Gumbel || f == Family::Joe;
}

CopulaModel CopulaModel::independence() { return CopulaModel(Family::Independence, Rotation::None, 0.0); }

CopulaModel::CopulaModel(Family family, Rotation rotation, double theta)
    : family_(family), rotation_(rotation), theta_(family == Family::Independence ? 0.0 : theta) {
    if (rotation != Rotation::None && !is_rotatable(family))
        domain(to_string(family) + " copula does not take a rotation");
    if (!std::isfinite(theta_)) domain("copula parameter must be finite");
    switch (family) {
        case Family::Independence:
            break;
        case Family::Gaussian:
            if (!(theta > -1.0 && theta < 1.0)) domain("Gaussian copula requires rho in (-1,1)");
            break;
        case Family::Frank:
            if (theta == 0.0) domain("Frank copula requires theta != 0");
            break;
        case Family::Clayton:
            if (!(theta > 0.0)) domain("Clayton copula requires theta > 0");
            break;
        case Family::Gumbel:
        case Family::Joe:
            if (!(theta >= 1.0)) domain(to_string(family) + " copula requires theta >= 1");
            break;
    }
}

double family_tau(Family family, double theta) {
    switch (family) {
        case Family::Independence: return 0.0;
        case Family::Gaussian: return 2.0 / std::numbers::pi * std::asin(theta);
        case Family::Frank: return frank_tau(theta);
        case Family::Clayton: return theta / (theta + 2.0);
        case Family::Gumbel: return 1.0 - 1.0 / theta;
        case Family::Joe: return joe_tau(theta);
    }
    return 0.0;
}

double CopulaModel::kendall_tau() const {
    const double t = family_tau(family_, theta_);
    return (rotation_ == Rotation::R90 || rotation_ == Rotation::R270) ? -t : t;
}

std::string CopulaModel::describe() const {
    std::ostringstream os;
    os << to_string(family_);
    if (family_ == Family::Independence) return os.str();
    os << '(';
    if (is_rotatable(family_)) os << to_string(rotation_) << ", ";
    os << (family_ == Family::Gaussian ? "rho=" : "theta=");
    os.precision(6);
    os << std::fixed << theta_ << ')';
    return os.str();
}

double cdf(const CopulaModel& m, double u, double v) {
    check_unit_closed(u, "cdf: u");
    check_unit_closed(v, "cdf: v");
    if (u == 0.0 || v == 0.0) return 0.0;
    if (u == 1.0) return v;
    if (v == 1.0) return u;
    const Family f = m.family();
    const double th = m.theta();
    double c = 0.0;
    switch (m.rotation()) {
        case Rotation::None: c = base_cdf(f, th, u, v); break;
        case Rotation::R90: c = v - base_cdf(f, th, 1.0 - u, v); break;
        case Rotation::R180: c = u + v - 1.0 + base_cdf(f, th, 1.0 - u, 1.0 - v); break;
        case Rotation::R270: c = u - base_cdf(f, th, u, 1.0 - v); break;
    }
    // Rounding can push the value just outside the Frechet bounds.
    return std::clamp(c, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

double log_density(const CopulaModel& m, double u, double v) {
    check_unit_open(u, "density: u");
    check_unit_open(v, "density: v");
    const Family f = m.family();
    const double th = m.theta();
    switch (m.rotation()) {
        case Rotation::None: return base_log_density(f, th, u, v);
        case Rotation::R90: return base_log_density(f, th, 1.0 - u, v);
        case Rotation::R180: return base_log_density(f, th, 1.0 - u, 1.0 - v);
        case Rotation::R270: return base_log_density(f, th, u, 1.0 - v);
    }
    return 0.0;
}

double density(const CopulaModel& m, double u, double v) { return std::exp(log_density(m, u, v)); }

double hfunc(const CopulaModel& m, double v, double given_u) {
    check_unit_closed(v, "hfunc: v");
    check_unit_open(given_u, "hfunc: given_u");
    if (v == 0.0) return 0.0;
    if (v == 1.0) return 1.0;
    const Family f = m.family();
    const double th = m.theta();
    const double u = given_u;
    double h = 0.0;
    switch (m.rotation()) {
        case Rotation::None: h = base_h(f, th, v, u); break;
        case Rotation::R90: h = base_h(f, th, v, 1.0 - u); break;
        case Rotation::R180: h = 1.0 - base_h(f, th, 1.0 - v, 1.0 - u); break;
        case Rotation::R270: h = 1.0 - base_h(f, th, 1.0 - v, u); break;
    }
    return std::clamp(h, 0.0, 1.0);
}

double hfunc_inverse(const CopulaModel& m, double x, double given_u) {
    check_unit_closed(x, "hfunc_inverse: x");
    check_unit_open(given_u, "hfunc_inverse: given_u");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const Family f = m.family();
    const double th = m.theta();
    const double u = given_u;
    switch (m.rotation()) {
        case Rotation::None: return base_h_inverse(f, th, x, u);
        case Rotation::R90: return base_h_inverse(f, th, x, 1.0 - u);
        case Rotation::R180: return 1.0 - base_h_inverse(f, th, 1.0 - x, 1.0 - u);
        case Rotation::R270: return 1.0 - base_h_inverse(f, th, 1.0 - x, u);
    }
    return x;
}

Rotation rotation_for_sign(Family family, double tau) {
    if (!is_rotatable(family)) return Rotation::None;
    return tau < 0.0 ? Rotation::R90 : Rotation::None;
}

CopulaModel tau_to_theta(Family family, Rotation rotation, double tau) {
    if (!(tau > -1.0 && tau < 1.0)) domain("tau_to_theta: |tau| must be < 1");
    if (tau == 0.0) return CopulaModel::independence();
    if (family == Family::Independence) domain("tau_to_theta: independence copula has tau = 0");
    if (rotation != Rotation::None && !is_rotatable(family))
        domain(to_string(family) + " copula does not take a rotation");
    if (is_rotatable(family)) {
        const bool negative_rotation = rotation == Rotation::R90 || rotation == Rotation::R270;
        if (negative_rotation != (tau < 0.0))
            domain("tau_to_theta: sign of tau does not match rotation " + to_string(rotation));
    }
    const double at = std::abs(tau);
    switch (family) {
        case Family::Gaussian:
            return {family, rotation, std::sin(std::numbers::pi * tau / 2.0)};
        case Family::Clayton:
            return {family, rotation, 2.0 * at / (1.0 - at)};
        case Family::Gumbel:
            return {family, rotation, 1.0 / (1.0 - at)};
        case Family::Frank:
        case Family::Joe: {
            const double lo = family == Family::Frank ? 1e-6 : 1.0;
            const double hi = 50.0;
            const auto f = [family](double th) { return family_tau(family, th); };
            if (at < f(lo) || at > f(hi))
                domain("tau_to_theta: |tau| outside the attainable range for " + to_string(family));
            const double th = numeric::bisect_increasing(f, at, lo, hi, 1e-14, 1e-12).x;
            if (family == Family::Frank) return {family, rotation, tau < 0.0 ? -th : th};
            return {family, rotation, th};
        }
        case Family::Independence:
            break;
    }
    return CopulaModel::independence();
}

void validate(const PseudoObservations& obs) {
    if (obs.u.size() != obs.v.size()) throw std::invalid_argument("pseudo-observations: length mismatch");
    if (obs.u.size() < 2) throw std::invalid_argument("pseudo-observations: need n >= 2");
    for (std::size_t i = 0; i < obs.u.size(); ++i) {
        if (!(obs.u[i] > 0.0 && obs.u[i] < 1.0 && obs.v[i] > 0.0 && obs.v[i] < 1.0))
            throw std::domain_error("pseudo-observation " + std::to_string(i) + " not strictly inside (0,1)");
    }
}

PseudoObservations sample(const CopulaModel& m, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
    Rng rng(seed);
    PseudoObservations out;
    out.u.resize(n);
    out.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = std::clamp(rng.uniform(), kBoundaryEps, 1.0 - kBoundaryEps);
        const double w = rng.uniform();
        out.u[i] = u;
        out.v[i] = std::clamp(hfunc_inverse(m, w, u), kBoundaryEps, 1.0 - kBoundaryEps);
    }
    return out;
}

}  // namespace twostage

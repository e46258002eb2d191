#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace twostage {

enum class Family { Independence, Gaussian, Frank, Clayton, Gumbel, Joe };

/// Counter-clockwise rotation of the base copula. R90 and R270 turn the
/// positive-dependence Archimedean families into negative-dependence ones.
enum class Rotation { None, R90, R180, R270 };

std::string to_string(Family f);
std::string to_string(Rotation r);
Family parse_family(std::string_view name);
Rotation parse_rotation(std::string_view name);

/// True when the family admits only positive dependence and needs a rotation
/// to represent negative Kendall tau.
bool is_rotatable(Family f);

/// Immutable bivariate one-parameter copula. The parameter is checked against
/// the family domain on construction:
///   Gaussian rho in (-1, 1), Frank theta != 0, Clayton theta > 0,
///   Gumbel and Joe theta >= 1, Independence ignores theta.
/// Only Clayton, Gumbel and Joe may carry a rotation.
class CopulaModel {
public:
    static CopulaModel independence();
    CopulaModel(Family family, Rotation rotation, double theta);

    Family family() const { return family_; }
    Rotation rotation() const { return rotation_; }
    double theta() const { return theta_; }

    /// Kendall's tau implied by the family, parameter and rotation.
    double kendall_tau() const;

    /// e.g. "Clayton(R90, theta=1.333333)".
    std::string describe() const;

    friend bool operator==(const CopulaModel&, const CopulaModel&) = default;

private:
    Family family_;
    Rotation rotation_;
    double theta_;
};

/// Clamp bound for pseudo-observations passed to density and h-functions.
inline constexpr double kBoundaryEps = 1e-10;

/// C(u, v) on the closed unit square.
double cdf(const CopulaModel& m, double u, double v);

/// c(u, v); u, v must lie in the open unit interval.
double density(const CopulaModel& m, double u, double v);
double log_density(const CopulaModel& m, double u, double v);

/// Conditional CDF C(v | u) = dC(u, v)/du; v in [0,1], given_u in (0,1).
double hfunc(const CopulaModel& m, double v, double given_u);

/// Solves hfunc(result | given_u) = x. Tolerance 1e-10 on the h-scale.
double hfunc_inverse(const CopulaModel& m, double x, double given_u);

/// Builds a model with Kendall tau equal to `tau`. tau == 0 yields the
/// independence copula. Throws std::domain_error for |tau| >= 1 or when the
/// rotation cannot express the sign of tau.
CopulaModel tau_to_theta(Family family, Rotation rotation, double tau);

/// The rotation to use for a rotatable family given the sign of tau
/// (None for tau >= 0, R90 for tau < 0); None for the other families.
Rotation rotation_for_sign(Family family, double tau);

/// Kendall tau of the unrotated base family at parameter theta.
double family_tau(Family family, double theta);

struct PseudoObservations {
    std::vector<double> u;
    std::vector<double> v;

    std::size_t size() const { return u.size(); }
};

/// Checks n >= 2, equal lengths, and every coordinate strictly inside (0,1).
void validate(const PseudoObservations& obs);

/// n i.i.d. pairs by conditional inversion: u, w ~ U(0,1), v = hfunc_inverse(w | u).
PseudoObservations sample(const CopulaModel& m, std::size_t n, std::uint64_t seed);

}  // namespace twostage

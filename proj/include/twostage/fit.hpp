#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "twostage/copula.hpp"
#include "twostage/marginal.hpp"

namespace twostage {

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (concordant - discordant) / (n(n-1)/2); pairs tied in either coordinate
/// count as neither. O(n log n) via Knight's merge-sort algorithm.
double empirical_kendall_tau(const PseudoObservations& obs);

struct FitResult {
    CopulaModel model = CopulaModel::independence();
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n = 0;
    int k = 0;  // free parameters: 0 for independence, 1 otherwise
    bool converged = false;
};

/// Sum of log c(u_i, v_i) (compensated summation).
double copula_loglik(const CopulaModel& m, const PseudoObservations& obs);

/// Maximum likelihood over the family's parameter interval:
///   Gaussian rho in (-0.9999, 0.9999), Clayton (1e-4, 50),
///   Gumbel and Joe (1 + 1e-6, 50), Frank (1e-6, 50) on the side given by the
///   sign of the sample Kendall tau.
/// Requires n >= 10 and every coordinate inside (0,1); throws FitError.
FitResult fit_mle(Family family, Rotation rotation, const PseudoObservations& obs);

struct Candidate {
    Family family = Family::Independence;
    Rotation rotation = Rotation::None;
    std::optional<FitResult> fit;
    std::string error;  // set when the fit failed
};

struct SelectionReport {
    std::vector<Candidate> candidates;
    double sample_tau = 0.0;
    std::optional<std::size_t> best_loglik, best_aic, best_bic;

    /// Model chosen under BIC; throws FitError when no candidate could be fitted.
    const FitResult& bic_winner() const;

    nlohmann::json to_json() const;
    /// Columns Family, LogLik, AIC, BIC.
    std::string to_text() const;
};

/// (p1, p2) of the rows with p2 > p2_above as copula pseudo-observations; p2 is
/// clamped to [kBoundaryEps, 1 - kBoundaryEps] since two-sided p-values may
/// reach 0 or 1. With uniform margins P(V > c) = 1 - c for every copula, so
/// the likelihood of the retained pairs is still maximised by sum log c(u, v);
/// restricting to large p2 keeps strong non-null signals out of the fit.
PseudoObservations pvalue_pairs(const HypothesisTable& table, double p2_above = 0.0);

/// The families compared by default: Gaussian, Frank, Clayton, Gumbel, Joe.
std::vector<Family> default_candidate_families();

/// Fits every family, rotating Clayton, Gumbel and Joe by 90 degrees when the
/// sample Kendall tau is negative. A failing candidate is recorded with its
/// error message and does not stop the others.
SelectionReport select_copula(const PseudoObservations& obs,
                              const std::vector<Family>& families = default_candidate_families());

}  // namespace twostage

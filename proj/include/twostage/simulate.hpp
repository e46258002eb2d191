#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "twostage/copula.hpp"
#include "twostage/fit.hpp"
#include "twostage/marginal.hpp"

namespace twostage {

inline constexpr std::uint64_t kDefaultSeed = 20240001;

enum class Method { Storey, TwoStageH, TwoStageS };

std::string to_string(Method m);

/// Which copula the procedures use on simulated data.
enum class AnalysisMode {
    Oracle,  // the generating copula
    Fixed,   // a named family at the generating Kendall tau
    Fitted,  // a named family refitted by maximum likelihood in every replicate
    Selected,  // the BIC winner among the candidate families, refitted in every replicate
};

std::string to_string(AnalysisMode m);
AnalysisMode parse_analysis_mode(const std::string& name);

struct SimulationConfig {
    std::size_t M = 8000;
    double mu = 3.0;
    double tau = -0.4;
    double p0 = 0.95;
    Family dep_family = Family::Clayton;  // rotated by 90 degrees for tau < 0
    std::size_t K = 100;
    double alpha = 0.05;
    double lambda = 0.5;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    std::vector<double> gamma1_grid;  // empty means the default grid
    /// Fitted and selected analyses use only pairs with p2 above this (0 keeps all).
    double fit_above = 0.5;

    /// Throws std::invalid_argument when a field is outside its domain.
    void validate() const;
    CopulaModel dependence_model() const;
};

/// Labels which hypotheses are non-null.
using TruthVector = std::vector<char>;

struct Dataset {
    HypothesisTable table;
    TruthVector theta;
};

/// One synthetic data set of M hypotheses.
///   (u, v) is drawn from the dependence copula; y is the Gamma(shape 3, rate 4)
///   quantile of u. A hypothesis is non-null with probability 1 - p0 and gets a
///   random sign s. Null: beta = s |z| with P(|Z| > |z|) = v for Z ~ N(0,1), so the
///   primary p-value equals v. Non-null: the same construction with Z ~ N(mu, 1),
///   i.e. P(|Z| > |beta|) = v. p1 is the clamped empirical CDF of y and p2 the
///   two-sided p-value of beta under N(0,1).
/// Under the null the pair (p1, p2) therefore follows the dependence copula.
Dataset generate_dataset(const SimulationConfig& cfg, std::uint64_t replicate_seed);

struct ReplicateCounts {
    std::size_t V = 0;   // false rejections
    std::size_t R = 0;   // rejections
    std::size_t S = 0;   // true rejections
    std::size_t M1 = 0;  // non-null hypotheses
};

ReplicateCounts count_outcome(const std::vector<char>& rejected, const TruthVector& theta);

struct MonteCarloResult {
    std::vector<ReplicateCounts> replicates;
    std::vector<double> gamma1_hat;  // two-stage H only, one per replicate
    double fdr_hat = 0.0, fdr_sd = 0.0;
    double tpr_hat = 0.0, tpr_sd = 0.0;

    /// Fills the means and sample standard deviations from `replicates`.
    void summarize();
    nlohmann::json to_json() const;
};

using CellResult = std::map<Method, MonteCarloResult>;

/// K replicates, each running Storey, two-stage H and two-stage S with the
/// generating copula. Replicate k uses seed derive_seed(cfg.seed, k).
CellResult run_cell(const SimulationConfig& cfg);

struct MisspecificationRow {
    Family family = Family::Clayton;  // unused in selected mode
    std::string label;                // e.g. "fitted:Joe" or "selected"
    std::map<std::string, std::size_t> chosen;  // selected mode: BIC winners over the replicates
    MonteCarloResult two_stage_H;
    MonteCarloResult two_stage_S;
};

struct MisspecificationResult {
    AnalysisMode mode = AnalysisMode::Fixed;
    MonteCarloResult storey;
    std::vector<MisspecificationRow> rows;
};

/// Data from cfg; procedures use each listed family, either at the
/// generating tau (Fixed) or refitted per replicate (Fitted). Rotation of
/// Clayton, Gumbel and Joe follows the sign of tau (Fixed) or of the sample
/// Kendall tau of the fitted pairs (Fitted). Selected mode yields a single row
/// whose copula is the per-replicate BIC winner among `families`.
MisspecificationResult run_misspecification(const SimulationConfig& cfg, const std::vector<Family>& families,
                                            AnalysisMode mode);

struct CriterionSummary {
    double mean = 0.0, sd = 0.0;
};

struct SelectionStudyRow {
    Family family = Family::Gaussian;
    std::size_t wins_loglik = 0, wins_aic = 0, wins_bic = 0;
    std::size_t failures = 0;
    CriterionSummary loglik, aic, bic;
};

struct SelectionStudy {
    std::size_t n = 0, reps = 0;
    CopulaModel truth = CopulaModel::independence();
    std::vector<SelectionStudyRow> rows;
    /// Largest |(BIC - AIC) - k (ln n - 2)| over every successful fit.
    double max_criterion_gap_error = 0.0;
    /// BIC - AIC of every successful one-parameter fit.
    std::vector<double> bic_minus_aic;
};

/// `reps` samples of size n from `truth`, each passed to select_copula.
SelectionStudy run_copula_selection_study(std::size_t n, const CopulaModel& truth, std::size_t reps,
                                          std::uint64_t seed, unsigned threads = 1,
                                          const std::vector<Family>& families = default_candidate_families());

/// Columns tau, mu, analysis, method, FDR, FDR_sd, TPR, TPR_sd, K, M.
std::string cell_table_rows(const SimulationConfig& cfg, const CellResult& r, const std::string& analysis = "oracle");
std::string misspecification_table_rows(const SimulationConfig& cfg, const MisspecificationResult& r);
std::string simtable_header();
/// Columns family, selected_loglik, selected_aic, selected_bic, loglik_mean, loglik_sd, aic_mean, aic_sd, bic_mean, bic_sd.
std::string selection_table(const SelectionStudy& s);

nlohmann::json to_json(const SimulationConfig& cfg);
nlohmann::json to_json(const CellResult& r);
nlohmann::json to_json(const MisspecificationResult& r);
nlohmann::json to_json(const SelectionStudy& s);

}  // namespace twostage

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "twostage/copula.hpp"
#include "twostage/marginal.hpp"

namespace twostage {

enum class Aggregation { HardH, SoftS, Primary };

struct AggregatedPValues {
    Aggregation kind = Aggregation::Primary;
    std::optional<double> gamma1;  // HardH only
    std::vector<double> values;     // aligned with the table rows
};

/// p_i = C(gamma1, p2_i) when p1_i <= gamma1, otherwise p1_i.
AggregatedPValues aggregate_hard(const HypothesisTable& table, const CopulaModel& model, double gamma1);

/// p_i = C(p2_i | p1_i), the conditional CDF of the primary p-value given the auxiliary one.
AggregatedPValues aggregate_soft(const HypothesisTable& table, const CopulaModel& model);

/// The raw primary p-values p2.
AggregatedPValues primary_pvalues(const HypothesisTable& table);

/// gamma2 with C(gamma1, gamma2) = gamma; needs 0 <= gamma <= gamma1.
double gamma2_from(const CopulaModel& model, double gamma1, double gamma);

/// #{p > lambda} / ((1 - lambda) M), capped at 1.
double estimate_pi0(std::span<const double> p, double lambda);
/// pi0 gamma M / max(#{p <= gamma}, 1).
double estimate_fdr(std::span<const double> p, double gamma, double pi0);

struct GammaSelection {
    double gamma_hat = 0.0;
    double pi0_hat = 0.0;
    std::size_t rejected = 0;
};

/// Largest observed p-value whose estimated FDR is at most alpha. When none
/// qualifies, or alpha is 0, gamma_hat is 0 and nothing is rejected.
GammaSelection select_gamma(std::span<const double> p, double alpha, double lambda);

/// Grid of 199 points 0.005..0.995 in steps of 0.005, then 0.9960..0.9995 in steps of 0.0005.
std::vector<double> default_gamma1_grid();
/// "default", a comma separated list, or "start:stop:step" (inclusive).
std::vector<double> parse_gamma1_grid(const std::string& spec);

struct ProcedureOutcome {
    std::string method;  // "storey", "H" or "S"
    double alpha = 0.0;
    double lambda = 0.0;
    double pi0_hat = 0.0;
    double gamma_hat = 0.0;
    std::optional<double> gamma1_hat;
    std::vector<double> p_aggregated;
    std::vector<char> rejected;  // 0/1 per table row
    std::size_t rejected_count = 0;
    std::vector<std::pair<double, std::size_t>> rejections_by_gamma1;  // HardH only
};

ProcedureOutcome run_one_stage_storey(const HypothesisTable& table, double alpha, double lambda);

ProcedureOutcome run_two_stage_S(const HypothesisTable& table, const CopulaModel& model, double alpha, double lambda);

/// Evaluates every grid point (in parallel with `threads` workers; the result
/// does not depend on the thread count) and keeps the gamma1 with the most
/// rejections, the smallest such gamma1 on ties.
ProcedureOutcome run_two_stage_H(const HypothesisTable& table, const CopulaModel& model, double alpha,
                                 double lambda, const std::vector<double>& gamma1_grid, unsigned threads = 1);

/// Summary plus rejected ids.
nlohmann::json to_json(const ProcedureOutcome& out, const HypothesisTable& table);
/// id, p1, p2, p_aggregated, rejected.
void write_decisions(const ProcedureOutcome& out, const HypothesisTable& table, const std::string& path,
                     const std::string& comment = "");
/// gamma1, rejections.
void write_gamma1_curve(const ProcedureOutcome& out, const std::string& path, const std::string& comment = "");

}  // namespace twostage

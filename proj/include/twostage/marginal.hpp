#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace twostage {

/// K-component Gaussian mixture used as the null density f0 of the primary
/// statistic.
class NullMixture {
public:
    /// Throws std::invalid_argument unless the three lists share a length
    /// K >= 1, weights are positive and sum to 1 within 1e-12, and sds > 0.
    NullMixture(std::vector<double> weights, std::vector<double> means, std::vector<double> sds);

    static NullMixture standard_normal();
    /// 0.615 N(0, 0.063^2) + 0.385 N(-0.002, 0.205^2), the null fitted to the
    /// knockout log-fold changes.
    static NullMixture knockout_default();

    static NullMixture from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& sds() const { return sds_; }

    double pdf(double beta) const;
    double cdf(double beta) const;
    /// 1 - cdf(beta), summed from component upper tails.
    double sf(double beta) const;
    /// Solves cdf(beta) = q by bisection; q must lie in (0,1).
    double quantile(double q) const;

private:
    std::vector<double> weights_, means_, sds_;
};

double mixture_cdf(const NullMixture& m, double beta);
double mixture_quantile(const NullMixture& m, double q);

enum class Tail { TwoSided, Left, Right };

Tail parse_tail(const std::string& name);

/// 2 min(F0(b), 1 - F0(b)) for TwoSided; F0(b) for Left; 1 - F0(b) for Right.
double p_two_sided(const NullMixture& m, double beta_hat, Tail tail = Tail::TwoSided);

/// Right-continuous empirical CDF of the auxiliary statistic.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values);

    std::size_t size() const { return sorted_.size(); }
    const std::vector<double>& sorted_values() const { return sorted_; }

    /// #{y_j <= y} / n.
    double operator()(double y) const;

private:
    std::vector<double> sorted_;
};

/// The empirical CDF at y, clamped into [1/(n+1), n/(n+1)].
double empirical_p1(const EmpiricalCdf& cdf, double y);

struct Hypothesis {
    std::string id;
    double beta_hat = 0.0;
    double y = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
};

struct HypothesisTable {
    std::vector<Hypothesis> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

/// p1 from the empirical CDF of ys, p2 from the null mixture. Throws
/// std::invalid_argument on length mismatch, empty input or duplicate ids.
HypothesisTable build_table(const std::vector<std::string>& ids, const std::vector<double>& beta_hats,
                            const std::vector<double>& ys, const NullMixture& m, Tail tail = Tail::TwoSided);

/// Columns id, beta_hat, y, p1, p2. Numbers use the shortest exact decimal
/// form so that reading back gives identical doubles.
void write_table(const HypothesisTable& t, const std::string& path, const std::string& comment = "");
HypothesisTable read_table(const std::string& path);

/// Reads id (or gene_id), beta_hat and y (or sd_boot) columns, e.g. the
/// bootstrap summary, and builds the table against the null mixture.
HypothesisTable read_statistics(const std::string& path, const NullMixture& m, Tail tail = Tail::TwoSided);

}  // namespace twostage

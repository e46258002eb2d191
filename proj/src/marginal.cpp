#include "twostage/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "twostage/numeric.hpp"
#include "twostage/tsv.hpp"

namespace twostage {

NullMixture::NullMixture(std::vector<double> weights, std::vector<double> means, std::vector<double> sds)
    : weights_(std::move(weights)), means_(std::move(means)), sds_(std::move(sds)) {
    const std::size_t k = weights_.size();
    if (k == 0) throw std::invalid_argument("null mixture: at least one component required");
    if (means_.size() != k || sds_.size() != k)
        throw std::invalid_argument("null mixture: weights, means and sds must have equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
            throw std::invalid_argument("null mixture: weights must be positive");
        if (!(sds_[i] > 0.0) || !std::isfinite(sds_[i]))
            throw std::invalid_argument("null mixture: sds must be positive");
        if (!std::isfinite(means_[i])) throw std::invalid_argument("null mixture: means must be finite");
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("null mixture: weights sum to " + format_double(total) + ", not 1");
}

NullMixture NullMixture::standard_normal() { return NullMixture({1.0}, {0.0}, {1.0}); }

NullMixture NullMixture::knockout_default() { return NullMixture({0.615, 0.385}, {0.0, -0.002}, {0.063, 0.205}); }

NullMixture NullMixture::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("null mixture: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "weights" && key != "means" && key != "sds")
            throw std::invalid_argument("null mixture: unknown key '" + key + "'");
    try {
        return NullMixture(j.at("weights").get<std::vector<double>>(), j.at("means").get<std::vector<double>>(),
                           j.at("sds").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("null mixture: ") + e.what());
    }
}

nlohmann::json NullMixture::to_json() const { return {{"weights", weights_}, {"means", means_}, {"sds", sds_}}; }

double NullMixture::pdf(double beta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i)
        acc += weights_[i] * numeric::normal_pdf((beta - means_[i]) / sds_[i]) / sds_[i];
    return acc;
}

double NullMixture::cdf(double beta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) acc += weights_[i] * numeric::normal_cdf((beta - means_[i]) / sds_[i]);
    return std::clamp(acc, 0.0, 1.0);
}

double NullMixture::sf(double beta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) acc += weights_[i] * numeric::normal_sf((beta - means_[i]) / sds_[i]);
    return std::clamp(acc, 0.0, 1.0);
}

double NullMixture::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("mixture quantile: q must lie in (0,1)");
    if (weights_.size() == 1) return means_[0] + sds_[0] * numeric::normal_quantile(q);
    // Each component quantile brackets the mixture quantile.
    double lo = INFINITY, hi = -INFINITY;
    const double z = numeric::normal_quantile(q);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        lo = std::min(lo, means_[i] + sds_[i] * z);
        hi = std::max(hi, means_[i] + sds_[i] * z);
    }
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    // Work on whichever tail keeps q representable without cancellation.
    if (q <= 0.5) {
        return numeric::bisect_increasing([this](double b) { return cdf(b); }, q, lo, hi, 4e-16 * scale, 0.0).x;
    }
    return numeric::bisect_increasing([this](double b) { return -sf(b); }, -(1.0 - q), lo, hi, 4e-16 * scale, 0.0)
        .x;
}

double mixture_cdf(const NullMixture& m, double beta) { return m.cdf(beta); }
double mixture_quantile(const NullMixture& m, double q) { return m.quantile(q); }

Tail parse_tail(const std::string& name) {
    if (name == "two-sided" || name == "two_sided") return Tail::TwoSided;
    if (name == "left") return Tail::Left;
    if (name == "right") return Tail::Right;
    throw std::invalid_argument("unknown tail '" + name + "' (expected two-sided, left or right)");
}

double p_two_sided(const NullMixture& m, double beta_hat, Tail tail) {
    switch (tail) {
        case Tail::Left:
            return m.cdf(beta_hat);
        case Tail::Right:
            return m.sf(beta_hat);
        case Tail::TwoSided:
            break;
    }
    return std::min(1.0, 2.0 * std::min(m.cdf(beta_hat), m.sf(beta_hat)));
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty()) throw std::invalid_argument("empirical cdf: no values");
    for (double x : sorted_)
        if (std::isnan(x)) throw std::invalid_argument("empirical cdf: NaN value");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double y) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), y) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double empirical_p1(const EmpiricalCdf& cdf, double y) {
    const double n = static_cast<double>(cdf.size());
    return std::clamp(cdf(y), 1.0 / (n + 1.0), n / (n + 1.0));
}

HypothesisTable build_table(const std::vector<std::string>& ids, const std::vector<double>& beta_hats,
                            const std::vector<double>& ys, const NullMixture& m, Tail tail) {
    if (ids.size() != beta_hats.size() || ids.size() != ys.size())
        throw std::invalid_argument("build_table: ids, beta_hats and ys differ in length");
    if (ids.empty()) throw std::invalid_argument("build_table: no hypotheses");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (id.empty() || id.find_first_of("\t\r\n") != std::string::npos || id.front() == '#')
            throw std::invalid_argument("build_table: id '" + id + "' is empty, starts with '#' or holds a tab or newline");
        if (!seen.insert(id).second) throw std::invalid_argument("build_table: duplicate id '" + id + "'");
    }

    const EmpiricalCdf H(ys);
    HypothesisTable t;
    t.rows.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Hypothesis h;
        h.id = ids[i];
        h.beta_hat = beta_hats[i];
        h.y = ys[i];
        h.p1 = empirical_p1(H, ys[i]);
        h.p2 = p_two_sided(m, beta_hats[i], tail);
        t.rows.push_back(std::move(h));
    }
    return t;
}

void write_table(const HypothesisTable& t, const std::string& path, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "id\tbeta_hat\ty\tp1\tp2\n";
    for (const auto& h : t.rows)
        out << h.id << '\t' << format_double(h.beta_hat) << '\t' << format_double(h.y) << '\t' << format_double(h.p1)
            << '\t' << format_double(h.p2) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

HypothesisTable read_table(const std::string& path) {
    const TsvTable tsv = read_tsv(path);
    const auto c_id = tsv.column({"id"}), c_b = tsv.column({"beta_hat"}), c_y = tsv.column({"y"}),
               c_p1 = tsv.column({"p1"}), c_p2 = tsv.column({"p2"});
    HypothesisTable t;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < tsv.rows.size(); ++r) {
        const auto& row = tsv.rows[r];
        const std::string where = tsv.where(r);
        Hypothesis h;
        h.id = row[c_id];
        if (!seen.insert(h.id).second) throw InputError(where + ": duplicate id '" + h.id + "'");
        h.beta_hat = parse_double(row[c_b], where);
        h.y = parse_double(row[c_y], where);
        h.p1 = parse_double(row[c_p1], where);
        h.p2 = parse_double(row[c_p2], where);
        if (h.p1 < 0.0 || h.p1 > 1.0 || h.p2 < 0.0 || h.p2 > 1.0) throw InputError(where + ": p-value outside [0,1]");
        t.rows.push_back(std::move(h));
    }
    return t;
}

HypothesisTable read_statistics(const std::string& path, const NullMixture& m, Tail tail) {
    const TsvTable tsv = read_tsv(path);
    const auto c_id = tsv.column({"id", "gene_id"}), c_b = tsv.column({"beta_hat"}), c_y = tsv.column({"y", "sd_boot"});
    if (tsv.rows.empty()) throw InputError(path + ": no data rows");
    std::vector<std::string> ids;
    std::vector<double> betas, ys;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < tsv.rows.size(); ++r) {
        const auto& row = tsv.rows[r];
        const std::string where = tsv.where(r);
        if (!seen.insert(row[c_id]).second) throw InputError(where + ": duplicate id '" + row[c_id] + "'");
        ids.push_back(row[c_id]);
        betas.push_back(parse_double(row[c_b], where));
        ys.push_back(parse_double(row[c_y], where));
    }
    return build_table(ids, betas, ys, m, tail);
}

}  // namespace twostage

#include "twostage/procedure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "twostage/numeric.hpp"
#include "twostage/parallel.hpp"
#include "twostage/tsv.hpp"

namespace twostage {

namespace {

void check_unit_open(double x, const char* what) {
    if (!(x > 0.0 && x < 1.0)) throw std::domain_error(std::string(what) + " must lie in (0,1)");
}

void require_rows(const HypothesisTable& t) {
    if (t.empty()) throw std::invalid_argument("procedure: the hypothesis table is empty");
}

ProcedureOutcome finish(std::string method, AggregatedPValues agg, double alpha, double lambda) {
    ProcedureOutcome out;
    out.method = std::move(method);
    out.alpha = alpha;
    out.lambda = lambda;
    out.gamma1_hat = agg.gamma1;
    const auto sel = select_gamma(agg.values, alpha, lambda);
    out.pi0_hat = sel.pi0_hat;
    out.gamma_hat = sel.gamma_hat;
    out.rejected.resize(agg.values.size(), 0);
    if (sel.rejected > 0)
        for (std::size_t i = 0; i < agg.values.size(); ++i) out.rejected[i] = agg.values[i] <= sel.gamma_hat;
    out.rejected_count = sel.rejected;
    out.p_aggregated = std::move(agg.values);
    return out;
}

std::ofstream open_out(const std::string& path, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    if (!comment.empty()) out << "# " << comment << '\n';
    return out;
}

}  // namespace

AggregatedPValues aggregate_hard(const HypothesisTable& table, const CopulaModel& model, double gamma1) {
    check_unit_open(gamma1, "gamma1");
    AggregatedPValues a;
    a.kind = Aggregation::HardH;
    a.gamma1 = gamma1;
    a.values.reserve(table.size());
    for (const auto& h : table.rows) a.values.push_back(h.p1 <= gamma1 ? cdf(model, gamma1, h.p2) : h.p1);
    return a;
}

AggregatedPValues aggregate_soft(const HypothesisTable& table, const CopulaModel& model) {
    AggregatedPValues a;
    a.kind = Aggregation::SoftS;
    a.values.reserve(table.size());
    for (const auto& h : table.rows) a.values.push_back(hfunc(model, h.p2, h.p1));
    return a;
}

AggregatedPValues primary_pvalues(const HypothesisTable& table) {
    AggregatedPValues a;
    a.kind = Aggregation::Primary;
    a.values.reserve(table.size());
    for (const auto& h : table.rows) a.values.push_back(h.p2);
    return a;
}

double gamma2_from(const CopulaModel& model, double gamma1, double gamma) {
    check_unit_open(gamma1, "gamma1");
    if (!(gamma >= 0.0 && gamma <= gamma1))
        throw std::domain_error("gamma2_from: need 0 <= gamma <= gamma1, since C(gamma1, 1) = gamma1");
    if (gamma == gamma1) return 1.0;
    return numeric::bisect_increasing([&](double v) { return cdf(model, gamma1, v); }, gamma, 0.0, 1.0, 1e-15,
                                      1e-13)
        .x;
}

double estimate_pi0(std::span<const double> p, double lambda) {
    check_unit_open(lambda, "lambda");
    if (p.empty()) throw std::invalid_argument("estimate_pi0: no p-values");
    const auto above = std::count_if(p.begin(), p.end(), [lambda](double x) { return x > lambda; });
    const double pi0 = static_cast<double>(above) / ((1.0 - lambda) * static_cast<double>(p.size()));
    return std::min(pi0, 1.0);
}

double estimate_fdr(std::span<const double> p, double gamma, double pi0) {
    const auto r = std::count_if(p.begin(), p.end(), [gamma](double x) { return x <= gamma; });
    return pi0 * gamma * static_cast<double>(p.size()) / static_cast<double>(std::max<std::ptrdiff_t>(r, 1));
}

GammaSelection select_gamma(std::span<const double> p, double alpha, double lambda) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0,1)");
    GammaSelection s;
    s.pi0_hat = estimate_pi0(p, lambda);
    if (alpha == 0.0) return s;
    std::vector<double> sorted(p.begin(), p.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());
    // Walk down from the largest value; at sorted[k] (last of its tie run) R = k + 1.
    for (std::size_t k = sorted.size(); k-- > 0;) {
        if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
        const double g = sorted[k];
        if (g <= 0.0) break;
        if (s.pi0_hat * g * m / static_cast<double>(k + 1) <= alpha) {
            s.gamma_hat = g;
            s.rejected = k + 1;
            break;
        }
    }
    return s;
}

std::vector<double> default_gamma1_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 199; ++k) g.push_back(k / 200.0);
    for (int k = 1992; k <= 1999; ++k) g.push_back(k / 2000.0);
    return g;
}

std::vector<double> parse_gamma1_grid(const std::string& spec) {
    if (spec.empty() || spec == "default") return default_gamma1_grid();
    std::vector<double> g;
    if (spec.find(':') != std::string::npos) {
        const auto a = spec.find(':'), b = spec.find(':', a + 1);
        if (b == std::string::npos) throw std::invalid_argument("gamma1 grid: expected start:stop:step");
        const double start = parse_double(spec.substr(0, a), "gamma1 grid start");
        const double stop = parse_double(spec.substr(a + 1, b - a - 1), "gamma1 grid stop");
        const double step = parse_double(spec.substr(b + 1), "gamma1 grid step");
        if (!(step > 0.0) || stop < start) throw std::invalid_argument("gamma1 grid: need step > 0 and stop >= start");
        const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
        if (count > 1000000) throw std::invalid_argument("gamma1 grid: more than 1e6 points");
        for (long k = 0; k <= count; ++k) g.push_back(start + static_cast<double>(k) * step);
    } else {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const auto comma = std::min(spec.find(',', pos), spec.size());
            g.push_back(parse_double(spec.substr(pos, comma - pos), "gamma1 grid"));
            pos = comma + 1;
        }
    }
    for (double x : g)
        if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("gamma1 grid: every point must lie in (0,1)");
    return g;
}

ProcedureOutcome run_one_stage_storey(const HypothesisTable& table, double alpha, double lambda) {
    require_rows(table);
    return finish("storey", primary_pvalues(table), alpha, lambda);
}

ProcedureOutcome run_two_stage_S(const HypothesisTable& table, const CopulaModel& model, double alpha, double lambda) {
    require_rows(table);
    return finish("S", aggregate_soft(table, model), alpha, lambda);
}

ProcedureOutcome run_two_stage_H(const HypothesisTable& table, const CopulaModel& model, double alpha,
                                 double lambda, const std::vector<double>& gamma1_grid, unsigned threads) {
    require_rows(table);
    if (gamma1_grid.empty()) throw std::invalid_argument("two-stage H: empty gamma1 grid");
    for (double g : gamma1_grid) check_unit_open(g, "gamma1 grid point");
    check_unit_open(lambda, "lambda");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0,1)");

    std::vector<std::size_t> counts(gamma1_grid.size());
    parallel_for(gamma1_grid.size(), threads, [&](std::size_t k) {
        counts[k] = select_gamma(aggregate_hard(table, model, gamma1_grid[k]).values, alpha, lambda).rejected;
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k) {
        if (counts[k] > counts[best] || (counts[k] == counts[best] && gamma1_grid[k] < gamma1_grid[best])) best = k;
    }
    ProcedureOutcome out = finish("H", aggregate_hard(table, model, gamma1_grid[best]), alpha, lambda);
    out.rejections_by_gamma1.reserve(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) out.rejections_by_gamma1.emplace_back(gamma1_grid[k], counts[k]);
    return out;
}

nlohmann::json to_json(const ProcedureOutcome& out, const HypothesisTable& table) {
    nlohmann::json ids = nlohmann::json::array();
    for (std::size_t i = 0; i < out.rejected.size(); ++i)
        if (out.rejected[i]) ids.push_back(table.rows.at(i).id);
    nlohmann::json j = {{"method", out.method},
                        {"alpha", out.alpha},
                        {"lambda", out.lambda},
                        {"pi0_hat", out.pi0_hat},
                        {"gamma_hat", out.gamma_hat},
                        {"gamma1_hat", out.gamma1_hat ? nlohmann::json(*out.gamma1_hat) : nlohmann::json(nullptr)},
                        {"hypotheses", out.rejected.size()},
                        {"rejected_count", out.rejected_count},
                        {"rejected_ids", ids}};
    return j;
}

void write_decisions(const ProcedureOutcome& out, const HypothesisTable& table, const std::string& path,
                     const std::string& comment) {
    if (table.size() != out.p_aggregated.size()) throw std::invalid_argument("write_decisions: table/outcome mismatch");
    auto f = open_out(path, comment);
    f << "id\tp1\tp2\tp_aggregated\trejected\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& h = table.rows[i];
        f << h.id << '\t' << format_double(h.p1) << '\t' << format_double(h.p2) << '\t'
          << format_double(out.p_aggregated[i]) << '\t' << (out.rejected[i] ? 1 : 0) << '\n';
    }
    if (!f) throw std::runtime_error(path + ": write failed");
}

void write_gamma1_curve(const ProcedureOutcome& out, const std::string& path, const std::string& comment) {
    auto f = open_out(path, comment);
    f << "gamma1\trejections\n";
    for (const auto& [g, c] : out.rejections_by_gamma1) f << format_double(g) << '\t' << c << '\n';
    if (!f) throw std::runtime_error(path + ": write failed");
}

}  // namespace twostage

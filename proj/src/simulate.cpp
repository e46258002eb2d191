#include "twostage/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "twostage/numeric.hpp"
#include "twostage/parallel.hpp"
#include "twostage/procedure.hpp"

namespace twostage {

namespace {

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

// |beta| with P(|Z| > |beta|) = v for Z ~ N(mu, 1).
double folded_normal_upper_quantile(double v, double mu) {
    if (mu == 0.0) return -numeric::normal_quantile(0.5 * v);
    const auto tail = [mu](double b) { return -(numeric::normal_cdf(mu - b) + numeric::normal_cdf(-b - mu)); };
    return numeric::bisect_increasing(tail, -v, 0.0, mu + 40.0, 1e-13, 0.0).x;
}

struct AnalysisSpec {
    AnalysisMode mode;
    Family family;
    std::vector<Family> candidates;  // selected mode
};

CopulaModel analysis_model(const SimulationConfig& cfg, const AnalysisSpec& spec, const HypothesisTable& table) {
    switch (spec.mode) {
        case AnalysisMode::Oracle:
            return cfg.dependence_model();
        case AnalysisMode::Fixed:
            if (cfg.tau == 0.0 || spec.family == Family::Independence) return CopulaModel::independence();
            return tau_to_theta(spec.family, rotation_for_sign(spec.family, cfg.tau), cfg.tau);
        case AnalysisMode::Fitted: {
            const auto obs = pvalue_pairs(table, cfg.fit_above);
            return fit_mle(spec.family, rotation_for_sign(spec.family, empirical_kendall_tau(obs)), obs).model;
        }
        case AnalysisMode::Selected:
            return select_copula(pvalue_pairs(table, cfg.fit_above), spec.candidates).bic_winner().model;
    }
    return CopulaModel::independence();
}

struct ReplicateResult {
    ReplicateCounts storey;
    std::vector<ReplicateCounts> hard, soft;
    std::vector<double> gamma1;
    std::vector<std::string> chosen;
};

// Runs every requested analysis on one replicate. The Storey baseline does not
// depend on the copula and is computed once.
ReplicateResult run_replicate(const SimulationConfig& cfg, const std::vector<AnalysisSpec>& specs,
                              const std::vector<double>& grid, std::size_t k) {
    const Dataset d = generate_dataset(cfg, derive_seed(cfg.seed, k));
    ReplicateResult r;
    r.storey = count_outcome(run_one_stage_storey(d.table, cfg.alpha, cfg.lambda).rejected, d.theta);
    for (const auto& spec : specs) {
        const CopulaModel m = analysis_model(cfg, spec, d.table);
        r.chosen.push_back(to_string(m.family()));
        const auto h = run_two_stage_H(d.table, m, cfg.alpha, cfg.lambda, grid, 1);
        r.hard.push_back(count_outcome(h.rejected, d.theta));
        r.gamma1.push_back(*h.gamma1_hat);
        r.soft.push_back(count_outcome(run_two_stage_S(d.table, m, cfg.alpha, cfg.lambda).rejected, d.theta));
    }
    return r;
}

std::vector<ReplicateResult> run_replicates(const SimulationConfig& cfg, const std::vector<AnalysisSpec>& specs) {
    cfg.validate();
    const auto grid = cfg.gamma1_grid.empty() ? default_gamma1_grid() : cfg.gamma1_grid;
    std::vector<ReplicateResult> out(cfg.K);
    parallel_for(cfg.K, cfg.threads, [&](std::size_t k) { out[k] = run_replicate(cfg, specs, grid, k); });
    return out;
}

CriterionSummary mean_sd(const std::vector<double>& x) {
    CriterionSummary s;
    if (x.empty()) return s;
    numeric::KahanSum sum;
    for (double v : x) sum.add(v);
    s.mean = sum.value() / static_cast<double>(x.size());
    if (x.size() > 1) {
        numeric::KahanSum ss;
        for (double v : x) ss.add((v - s.mean) * (v - s.mean));
        s.sd = std::sqrt(ss.value() / static_cast<double>(x.size() - 1));
    }
    return s;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::Storey: return "storey";
        case Method::TwoStageH: return "two_stage_H";
        case Method::TwoStageS: return "two_stage_S";
    }
    return "?";
}

std::string to_string(AnalysisMode m) {
    switch (m) {
        case AnalysisMode::Oracle: return "oracle";
        case AnalysisMode::Fixed: return "fixed";
        case AnalysisMode::Fitted: return "fitted";
        case AnalysisMode::Selected: return "selected";
    }
    return "?";
}

AnalysisMode parse_analysis_mode(const std::string& name) {
    if (name == "oracle") return AnalysisMode::Oracle;
    if (name == "fixed") return AnalysisMode::Fixed;
    if (name == "fitted") return AnalysisMode::Fitted;
    if (name == "selected") return AnalysisMode::Selected;
    throw std::invalid_argument("unknown analysis mode '" + name + "' (expected oracle, fixed, fitted or selected)");
}

void SimulationConfig::validate() const {
    if (M < 2) throw std::invalid_argument("simulation: M must be at least 2");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("simulation: mu must be >= 0");
    if (!(tau > -1.0 && tau <= 0.0)) throw std::invalid_argument("simulation: tau must lie in (-1, 0]");
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("simulation: p0 must lie in [0, 1]");
    if (K < 1) throw std::invalid_argument("simulation: K must be at least 1");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("simulation: alpha must lie in [0, 1)");
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("simulation: lambda must lie in (0, 1)");
    if (dep_family == Family::Independence && tau != 0.0)
        throw std::invalid_argument("simulation: the independence copula needs tau = 0");
    if (!(fit_above >= 0.0 && fit_above < 1.0)) throw std::invalid_argument("simulation: fit_above must lie in [0, 1)");
    for (double g : gamma1_grid)
        if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("simulation: gamma1 grid points must lie in (0,1)");
}

CopulaModel SimulationConfig::dependence_model() const {
    if (tau == 0.0) return CopulaModel::independence();
    return tau_to_theta(dep_family, rotation_for_sign(dep_family, tau), tau);
}

Dataset generate_dataset(const SimulationConfig& cfg, std::uint64_t replicate_seed) {
    cfg.validate();
    const auto pairs = sample(cfg.dependence_model(), cfg.M, derive_seed(replicate_seed, 1));
    Rng aux(derive_seed(replicate_seed, 2));
    std::vector<std::string> ids(cfg.M);
    std::vector<double> beta(cfg.M), y(cfg.M);
    Dataset d;
    d.theta.resize(cfg.M);
    for (std::size_t i = 0; i < cfg.M; ++i) {
        const bool alt = aux.uniform() < 1.0 - cfg.p0;
        const double sign = aux.uniform() < 0.5 ? -1.0 : 1.0;
        const double v = pairs.v[i];
        const double magnitude = alt ? folded_normal_upper_quantile(v, cfg.mu) : -numeric::normal_quantile(0.5 * v);
        ids[i] = "h" + std::to_string(i + 1);
        beta[i] = sign * magnitude;
        y[i] = numeric::gamma_quantile(pairs.u[i], 3.0, 4.0);
        d.theta[i] = alt;
    }
    d.table = build_table(ids, beta, y, NullMixture::standard_normal());
    return d;
}

ReplicateCounts count_outcome(const std::vector<char>& rejected, const TruthVector& theta) {
    if (rejected.size() != theta.size()) throw std::invalid_argument("count_outcome: length mismatch");
    ReplicateCounts c;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        c.M1 += theta[i] != 0;
        if (!rejected[i]) continue;
        ++c.R;
        if (theta[i])
            ++c.S;
        else
            ++c.V;
    }
    return c;
}

void MonteCarloResult::summarize() {
    std::vector<double> fdr, tpr;
    for (const auto& c : replicates) {
        fdr.push_back(static_cast<double>(c.V) / static_cast<double>(std::max<std::size_t>(c.R, 1)));
        tpr.push_back(static_cast<double>(c.S) / static_cast<double>(std::max<std::size_t>(c.M1, 1)));
    }
    const auto f = mean_sd(fdr), t = mean_sd(tpr);
    fdr_hat = f.mean;
    fdr_sd = f.sd;
    tpr_hat = t.mean;
    tpr_sd = t.sd;
}

nlohmann::json MonteCarloResult::to_json() const {
    std::vector<std::size_t> V, R, S, M1;
    for (const auto& c : replicates) {
        V.push_back(c.V);
        R.push_back(c.R);
        S.push_back(c.S);
        M1.push_back(c.M1);
    }
    nlohmann::json j = {{"fdr_hat", fdr_hat}, {"fdr_sd", fdr_sd}, {"tpr_hat", tpr_hat}, {"tpr_sd", tpr_sd},
                        {"V", V},           {"R", R},           {"S", S},           {"M1", M1}};
    if (!gamma1_hat.empty()) j["gamma1_hat"] = gamma1_hat;
    return j;
}

CellResult run_cell(const SimulationConfig& cfg) {
    const auto reps = run_replicates(cfg, {{AnalysisMode::Oracle, cfg.dep_family, {}}});
    CellResult out;
    auto& st = out[Method::Storey];
    auto& h = out[Method::TwoStageH];
    auto& s = out[Method::TwoStageS];
    for (const auto& r : reps) {
        st.replicates.push_back(r.storey);
        h.replicates.push_back(r.hard[0]);
        h.gamma1_hat.push_back(r.gamma1[0]);
        s.replicates.push_back(r.soft[0]);
    }
    for (auto& [_, m] : out) m.summarize();
    return out;
}

MisspecificationResult run_misspecification(const SimulationConfig& cfg, const std::vector<Family>& families,
                                            AnalysisMode mode) {
    if (families.empty()) throw std::invalid_argument("misspecification: no analysis families");
    if (mode == AnalysisMode::Oracle)
        throw std::invalid_argument("misspecification: mode must be fixed, fitted or selected");
    std::vector<AnalysisSpec> specs;
    if (mode == AnalysisMode::Selected)
        specs.push_back({mode, families.front(), families});
    else
        for (Family f : families) specs.push_back({mode, f, {}});
    const auto reps = run_replicates(cfg, specs);
    MisspecificationResult out;
    out.mode = mode;
    out.rows.resize(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
        out.rows[j].family = specs[j].family;
        out.rows[j].label = mode == AnalysisMode::Selected ? to_string(mode) : to_string(mode) + ":" + to_string(specs[j].family);
    }
    for (const auto& r : reps) {
        out.storey.replicates.push_back(r.storey);
        for (std::size_t j = 0; j < specs.size(); ++j) {
            ++out.rows[j].chosen[r.chosen[j]];
            out.rows[j].two_stage_H.replicates.push_back(r.hard[j]);
            out.rows[j].two_stage_H.gamma1_hat.push_back(r.gamma1[j]);
            out.rows[j].two_stage_S.replicates.push_back(r.soft[j]);
        }
    }
    out.storey.summarize();
    for (auto& row : out.rows) {
        row.two_stage_H.summarize();
        row.two_stage_S.summarize();
    }
    return out;
}

SelectionStudy run_copula_selection_study(std::size_t n, const CopulaModel& truth, std::size_t reps,
                                          std::uint64_t seed, unsigned threads, const std::vector<Family>& families) {
    if (reps < 1) throw std::invalid_argument("selection study: reps must be at least 1");
    std::vector<SelectionReport> reports(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        reports[r] = select_copula(sample(truth, n, derive_seed(seed, r)), families);
    });
    SelectionStudy s;
    s.n = n;
    s.reps = reps;
    s.truth = truth;
    const double gap = std::log(static_cast<double>(n)) - 2.0;
    for (std::size_t j = 0; j < families.size(); ++j) {
        SelectionStudyRow row;
        row.family = families[j];
        std::vector<double> ll, aic, bic;
        for (const auto& rep : reports) {
            const auto& c = rep.candidates[j];
            if (!c.fit) {
                ++row.failures;
                continue;
            }
            ll.push_back(c.fit->loglik);
            aic.push_back(c.fit->aic);
            bic.push_back(c.fit->bic);
            if (c.fit->k > 0) s.bic_minus_aic.push_back(c.fit->bic - c.fit->aic);
            s.max_criterion_gap_error =
                std::max(s.max_criterion_gap_error, std::abs((c.fit->bic - c.fit->aic) - c.fit->k * gap));
            row.wins_loglik += rep.best_loglik && *rep.best_loglik == j;
            row.wins_aic += rep.best_aic && *rep.best_aic == j;
            row.wins_bic += rep.best_bic && *rep.best_bic == j;
        }
        row.loglik = mean_sd(ll);
        row.aic = mean_sd(aic);
        row.bic = mean_sd(bic);
        s.rows.push_back(row);
    }
    return s;
}

std::string simtable_header() { return "tau\tmu\tanalysis\tmethod\tFDR\tFDR_sd\tTPR\tTPR_sd\tK\tM\n"; }

namespace {

std::string table_row(const SimulationConfig& cfg, const std::string& analysis, const std::string& method,
                      const MonteCarloResult& m) {
    std::ostringstream out;
    out << fixed6(cfg.tau) << '\t' << fixed6(cfg.mu) << '\t' << analysis << '\t' << method << '\t' << fixed6(m.fdr_hat)
        << '\t' << fixed6(m.fdr_sd) << '\t' << fixed6(m.tpr_hat) << '\t' << fixed6(m.tpr_sd) << '\t'
        << m.replicates.size() << '\t' << cfg.M << '\n';
    return out.str();
}

}  // namespace

std::string cell_table_rows(const SimulationConfig& cfg, const CellResult& r, const std::string& analysis) {
    std::string out;
    for (const auto& [method, m] : r) out += table_row(cfg, analysis, to_string(method), m);
    return out;
}

std::string misspecification_table_rows(const SimulationConfig& cfg, const MisspecificationResult& r) {
    std::string out = table_row(cfg, to_string(r.mode), to_string(Method::Storey), r.storey);
    for (const auto& row : r.rows) {
        out += table_row(cfg, row.label, to_string(Method::TwoStageH), row.two_stage_H);
        out += table_row(cfg, row.label, to_string(Method::TwoStageS), row.two_stage_S);
    }
    return out;
}

std::string selection_table(const SelectionStudy& s) {
    std::ostringstream out;
    out << "family\tselected_loglik\tselected_aic\tselected_bic\tloglik_mean\tloglik_sd\taic_mean\taic_sd\tbic_mean\tbic_"
           "sd\n";
    for (const auto& r : s.rows) {
        out << to_string(r.family) << '\t' << r.wins_loglik << '\t' << r.wins_aic << '\t' << r.wins_bic << '\t'
            << fixed6(r.loglik.mean) << '\t' << fixed6(r.loglik.sd) << '\t' << fixed6(r.aic.mean) << '\t'
            << fixed6(r.aic.sd) << '\t' << fixed6(r.bic.mean) << '\t' << fixed6(r.bic.sd) << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const SimulationConfig& cfg) {
    return {{"M", cfg.M},
            {"mu", cfg.mu},
            {"tau", cfg.tau},
            {"p0", cfg.p0},
            {"dep_family", to_string(cfg.dep_family)},
            {"dependence_model", cfg.dependence_model().describe()},
            {"K", cfg.K},
            {"alpha", cfg.alpha},
            {"lambda", cfg.lambda},
            {"seed", cfg.seed},
            {"fit_above", cfg.fit_above},
            {"gamma1_grid_points", cfg.gamma1_grid.empty() ? default_gamma1_grid().size() : cfg.gamma1_grid.size()}};
}

nlohmann::json to_json(const CellResult& r) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [method, m] : r) j[to_string(method)] = m.to_json();
    return j;
}

nlohmann::json to_json(const MisspecificationResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"label", row.label},
                        {"chosen_families", row.chosen},
                        {"two_stage_H", row.two_stage_H.to_json()},
                        {"two_stage_S", row.two_stage_S.to_json()}});
    return {{"mode", to_string(r.mode)}, {"storey", r.storey.to_json()}, {"rows", rows}};
}

nlohmann::json to_json(const SelectionStudy& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"family", to_string(r.family)},
                        {"selected", {{"loglik", r.wins_loglik}, {"aic", r.wins_aic}, {"bic", r.wins_bic}}},
                        {"failures", r.failures},
                        {"loglik", {{"mean", r.loglik.mean}, {"sd", r.loglik.sd}}},
                        {"aic", {{"mean", r.aic.mean}, {"sd", r.aic.sd}}},
                        {"bic", {{"mean", r.bic.mean}, {"sd", r.bic.sd}}}});
    return {{"n", s.n},
            {"reps", s.reps},
            {"truth", s.truth.describe()},
            {"max_criterion_gap_error", s.max_criterion_gap_error},
            {"rows", rows}};
}

}  // namespace twostage

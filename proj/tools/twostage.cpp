// twostage: bootstrap, copula fitting, two-stage testing and simulation from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "twostage/fit.hpp"
#include "twostage/ingest.hpp"
#include "twostage/marginal.hpp"
#include "twostage/procedure.hpp"
#include "twostage/simulate.hpp"
#include "twostage/tsv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace twostage;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Base seed, printed in every output header")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 256u))
        ->capture_default_str();
    cmd->add_option("--out-dir", c.out_dir, "Directory for output files (created if missing)")->capture_default_str();
}

std::string header(const std::string& command, const Common& c, const std::string& extra = "") {
    std::string h = "twostage " + command + " seed=" + std::to_string(c.seed);
    if (!extra.empty()) h += " " + extra;
    return h;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

NullMixture load_null(const std::string& path) {
    if (path.empty() || path == "standard") return NullMixture::standard_normal();
    if (path == "knockout") return NullMixture::knockout_default();
    try {
        return NullMixture::from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::vector<Family> parse_families(const std::string& list) {
    if (list.empty() || list == "default") return default_candidate_families();
    std::vector<Family> out;
    for (const auto& name : split(list, ',')) out.push_back(parse_family(name));
    return out;
}

// How the test subcommand obtains its copula.
//   auto                     BIC winner among the default families
//   FAMILY                   maximum likelihood fit, rotation by the sign of the sample tau
//   FAMILY:THETA             fixed parameter, rotation R0
//   FAMILY:ROTATION:THETA    fixed parameter and rotation
struct CopulaSpec {
    enum Kind { Auto, Fit, Fixed } kind = Auto;
    Family family = Family::Independence;
    CopulaModel model = CopulaModel::independence();
};

CopulaSpec parse_copula_spec(const std::string& spec) {
    CopulaSpec c;
    if (spec == "auto") return c;
    const auto parts = split(spec, ':');
    try {
        const Family f = parse_family(parts.at(0));
        c.family = f;
        if (f == Family::Independence && parts.size() == 1) {
            c.kind = CopulaSpec::Fixed;
            return c;
        }
        if (parts.size() == 1) {
            c.kind = CopulaSpec::Fit;
            return c;
        }
        if (parts.size() > 3) throw std::invalid_argument("too many fields");
        const Rotation r = parts.size() == 3 ? parse_rotation(upper(parts[1])) : Rotation::None;
        c.kind = CopulaSpec::Fixed;
        c.model = CopulaModel(f, r, parse_double(parts.back(), "--copula"));
    } catch (const std::exception& e) {
        throw UsageError("--copula '" + spec + "': " + e.what() +
                         " (expected auto, FAMILY, FAMILY:THETA or FAMILY:ROTATION:THETA)");
    }
    return c;
}

// ---------------------------------------------------------------- bootstrap

struct BootstrapArgs {
    Common common;
    std::string in;
};

int cmd_bootstrap(const BootstrapArgs& a) {
    const auto data = read_counts(a.in);
    const auto summary = summarize(data, a.common.threads);
    const auto dir = prepare_out_dir(a.common.out_dir);
    write_summary(summary, (dir / "fold_changes.tsv").string(), header("bootstrap", a.common, "in=" + a.in));
    std::cout << "wrote " << summary.size() << " genes to " << (dir / "fold_changes.tsv").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- fit / test

struct TableArgs {
    Common common;
    std::string in;
    std::string null = "standard";
    std::string tail = "two-sided";
    std::string families = "default";
    double fit_above = 0.0;
};

void add_table_options(CLI::App* cmd, TableArgs& a) {
    cmd->add_option("--in", a.in, "Statistics TSV with id (or gene_id), beta_hat and y (or sd_boot)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--null", a.null, "Null mixture: standard, knockout, or a JSON file")->capture_default_str();
    cmd->add_option("--tail", a.tail, "two-sided, left or right")->capture_default_str();
    cmd->add_option("--families", a.families, "Comma separated candidate families, or default")
        ->capture_default_str();
    cmd->add_option("--fit-above", a.fit_above, "Fit the copula only on pairs with p2 above this value")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
}

HypothesisTable load_table(const TableArgs& a) { return read_statistics(a.in, load_null(a.null), parse_tail(a.tail)); }

int cmd_fit(const TableArgs& a) {
    const auto families = parse_families(a.families);
    const auto table = load_table(a);
    const auto obs = pvalue_pairs(table, a.fit_above);
    if (obs.size() < 10) throw FitError("copula fitting needs at least 10 hypotheses, got " + std::to_string(obs.size()));
    const auto report = select_copula(obs, families);
    json j = report.to_json();
    j["command"] = header("fit", a.common, "in=" + a.in);
    j["seed"] = a.common.seed;
    const auto dir = prepare_out_dir(a.common.out_dir);
    write_json(dir / "selection.json", j);
    std::cout << "# " << header("fit", a.common) << '\n' << report.to_text();
    return 0;
}

struct TestArgs {
    TableArgs table;
    std::string method = "H";
    double alpha = 0.05;
    double lambda = 0.5;
    std::string copula = "auto";
    std::string grid = "default";
};

int cmd_test(const TestArgs& a) {
    const auto spec = parse_copula_spec(a.copula);
    const auto grid = parse_gamma1_grid(a.grid);
    const auto families = parse_families(a.table.families);
    const auto table = load_table(a.table);

    std::optional<SelectionReport> report;
    CopulaModel model = spec.model;
    if (a.method != "storey") {
        if (spec.kind != CopulaSpec::Fixed) {
            const auto obs = pvalue_pairs(table, a.table.fit_above);
            if (obs.size() < 10)
                throw FitError("copula fitting needs at least 10 hypotheses, got " + std::to_string(obs.size()));
            if (spec.kind == CopulaSpec::Auto) {
                report = select_copula(obs, families);
                model = report->bic_winner().model;
            } else {
                model = fit_mle(spec.family, rotation_for_sign(spec.family, empirical_kendall_tau(obs)), obs).model;
            }
        }
    }

    ProcedureOutcome out;
    if (a.method == "storey")
        out = run_one_stage_storey(table, a.alpha, a.lambda);
    else if (a.method == "S")
        out = run_two_stage_S(table, model, a.alpha, a.lambda);
    else
        out = run_two_stage_H(table, model, a.alpha, a.lambda, grid, a.table.common.threads);

    std::ostringstream extra;
    extra << "method=" << a.method << " alpha=" << format_double(a.alpha) << " lambda=" << format_double(a.lambda);
    if (a.method != "storey") extra << " copula=" << model.describe();
    if (a.table.fit_above > 0.0) extra << " fit_above=" << format_double(a.table.fit_above);
    const std::string head = header("test", a.table.common, extra.str());

    json j = to_json(out, table);
    j["command"] = head;
    j["seed"] = a.table.common.seed;
    if (a.method != "storey") j["copula"] = model.describe();

    const auto dir = prepare_out_dir(a.table.common.out_dir);
    write_decisions(out, table, (dir / "decisions.tsv").string(), head);
    write_json(dir / "outcome.json", j);
    if (a.method == "H") write_gamma1_curve(out, (dir / "gamma1_curve.tsv").string(), head);
    if (report) {
        json s = report->to_json();
        s["command"] = head;
        s["seed"] = a.table.common.seed;
        write_json(dir / "selection.json", s);
    }
    std::cout << "# " << head << '\n' << "rejected " << out.rejected_count << " of " << table.size();
    if (out.gamma1_hat) std::cout << " (gamma1_hat=" << format_double(*out.gamma1_hat) << ")";
    std::cout << '\n';
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    Common common;
    std::string config;
    std::optional<std::string> study, mode, grid, families;
    std::optional<double> alpha, lambda, p0, fit_above;
    std::optional<std::size_t> K, M, n, reps;
    std::optional<std::vector<double>> mu, tau;
};

std::vector<double> number_or_list(const json& j, const std::string& key) {
    if (j.is_number()) return {j.get<double>()};
    if (j.is_array() && !j.empty()) return j.get<std::vector<double>>();
    throw ConfigError("config key '" + key + "' must be a number or a non-empty list of numbers");
}

struct SimulationPlan {
    std::string study = "cell";
    SimulationConfig base;
    std::vector<double> mus{3.0}, taus{-0.4};
    AnalysisMode mode = AnalysisMode::Fitted;
    std::vector<Family> families = default_candidate_families();
    std::size_t n = 8000, reps = 100;
    Family truth_family = Family::Clayton;
    double truth_tau = -0.4;
};

SimulationPlan make_plan(const SimulateArgs& a) {
    SimulationPlan p;
    json cfg = json::object();
    if (!a.config.empty()) {
        try {
            cfg = json::parse(read_text(a.config));
        } catch (const json::exception& e) {
            throw ConfigError(a.config + ": " + e.what());
        }
        if (!cfg.is_object()) throw ConfigError(a.config + ": top level must be an object");
    }
    static const std::vector<std::string> known = {
        "study", "M",        "mu",     "tau",  "p0", "dep_family", "K",           "alpha", "lambda", "seed",
        "threads", "gamma1_grid", "fit_above", "mode", "families", "n", "reps", "truth_family", "truth_tau"};
    for (const auto& [key, _] : cfg.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError((a.config.empty() ? std::string("config") : a.config) + ": unknown key '" + key + "'");

    try {
        auto& b = p.base;
        if (cfg.contains("study")) p.study = cfg["study"].get<std::string>();
        if (cfg.contains("M")) b.M = cfg["M"].get<std::size_t>();
        if (cfg.contains("mu")) p.mus = number_or_list(cfg["mu"], "mu");
        if (cfg.contains("tau")) p.taus = number_or_list(cfg["tau"], "tau");
        if (cfg.contains("p0")) b.p0 = cfg["p0"].get<double>();
        if (cfg.contains("dep_family")) b.dep_family = parse_family(cfg["dep_family"].get<std::string>());
        if (cfg.contains("K")) b.K = cfg["K"].get<std::size_t>();
        if (cfg.contains("alpha")) b.alpha = cfg["alpha"].get<double>();
        if (cfg.contains("lambda")) b.lambda = cfg["lambda"].get<double>();
        if (cfg.contains("seed")) b.seed = cfg["seed"].get<std::uint64_t>();
        if (cfg.contains("threads")) b.threads = cfg["threads"].get<unsigned>();
        if (cfg.contains("gamma1_grid")) {
            const auto& g = cfg["gamma1_grid"];
            b.gamma1_grid = g.is_string() ? parse_gamma1_grid(g.get<std::string>()) : g.get<std::vector<double>>();
        }
        if (cfg.contains("fit_above")) b.fit_above = cfg["fit_above"].get<double>();
        if (cfg.contains("mode")) p.mode = parse_analysis_mode(cfg["mode"].get<std::string>());
        if (cfg.contains("families")) {
            p.families.clear();
            for (const auto& f : cfg["families"].get<std::vector<std::string>>()) p.families.push_back(parse_family(f));
        }
        if (cfg.contains("n")) p.n = cfg["n"].get<std::size_t>();
        if (cfg.contains("reps")) p.reps = cfg["reps"].get<std::size_t>();
        if (cfg.contains("truth_family")) p.truth_family = parse_family(cfg["truth_family"].get<std::string>());
        if (cfg.contains("truth_tau")) p.truth_tau = cfg["truth_tau"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError((a.config.empty() ? std::string("config") : a.config) + ": " + e.what());
    }

    // Flags override the file. --seed and --threads always apply since they carry defaults.
    auto& b = p.base;
    if (a.study) p.study = *a.study;
    if (a.M) b.M = *a.M;
    if (a.mu) p.mus = *a.mu;
    if (a.tau) p.taus = *a.tau;
    if (a.p0) b.p0 = *a.p0;
    if (a.K) b.K = *a.K;
    if (a.alpha) b.alpha = *a.alpha;
    if (a.lambda) b.lambda = *a.lambda;
    if (a.fit_above) b.fit_above = *a.fit_above;
    if (a.grid) b.gamma1_grid = parse_gamma1_grid(*a.grid);
    if (a.mode) p.mode = parse_analysis_mode(*a.mode);
    if (a.families) p.families = parse_families(*a.families);
    if (a.n) p.n = *a.n;
    if (a.reps) p.reps = *a.reps;
    if (!cfg.contains("seed") || a.common.seed != kDefaultSeed) b.seed = a.common.seed;
    if (!cfg.contains("threads") || a.common.threads != 1) b.threads = a.common.threads;

    if (p.study != "cell" && p.study != "misspecification" && p.study != "selection")
        throw ConfigError("study must be cell, misspecification or selection, got '" + p.study + "'");
    if (p.study == "misspecification" && p.mode == AnalysisMode::Oracle)
        throw ConfigError("misspecification needs mode fixed, fitted or selected");
    if (p.families.empty()) throw ConfigError("families must not be empty");
    for (double mu : p.mus)
        for (double tau : p.taus) {
            SimulationConfig c = b;
            c.mu = mu;
            c.tau = tau;
            try {
                c.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
    if (p.study == "selection") {
        if (p.n < 10) throw ConfigError("selection study needs n >= 10");
        if (p.reps < 1) throw ConfigError("selection study needs reps >= 1");
        if (!(p.truth_tau > -1.0 && p.truth_tau < 1.0)) throw ConfigError("truth_tau must lie in (-1, 1)");
    }
    return p;
}

int cmd_simulate(const SimulateArgs& a) {
    const SimulationPlan plan = make_plan(a);
    Common common = a.common;
    common.seed = plan.base.seed;
    const std::string head = header("simulate", common, "study=" + plan.study);

    std::string table;
    json result;
    result["command"] = head;
    result["seed"] = plan.base.seed;
    result["study"] = plan.study;
    if (plan.study == "selection") {
        const auto truth =
            tau_to_theta(plan.truth_family, rotation_for_sign(plan.truth_family, plan.truth_tau), plan.truth_tau);
        const auto s =
            run_copula_selection_study(plan.n, truth, plan.reps, plan.base.seed, plan.base.threads, plan.families);
        table = selection_table(s);
        result["selection"] = to_json(s);
        std::cout << "# " << head << '\n' << table;
    } else {
        table = simtable_header();
        result["cells"] = json::array();
        for (double tau : plan.taus)
            for (double mu : plan.mus) {
                SimulationConfig c = plan.base;
                c.mu = mu;
                c.tau = tau;
                json cell = {{"config", to_json(c)}};
                if (plan.study == "cell") {
                    const auto r = run_cell(c);
                    table += cell_table_rows(c, r);
                    cell["results"] = to_json(r);
                } else {
                    const auto r = run_misspecification(c, plan.families, plan.mode);
                    table += misspecification_table_rows(c, r);
                    cell["results"] = to_json(r);
                }
                result["cells"].push_back(std::move(cell));
            }
        std::cout << "# " << head << '\n' << table;
    }
    const auto dir = prepare_out_dir(common.out_dir);
    write_text(dir / "simtable.tsv", "# " + head + "\n" + table);
    write_json(dir / (plan.study == "selection" ? "selection.json" : "simulation.json"), result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Copula-assisted two-stage multiple testing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "twostage 1.0");

    BootstrapArgs boot;
    auto* b = app.add_subcommand("bootstrap", "Log2 fold changes and exhaustive bootstrap SDs from replicate counts");
    b->add_option("--in", boot.in, "Counts TSV: gene_id, ko_1..ko_r, wt_1..wt_r (gzip accepted)")
        ->required()
        ->check(CLI::ExistingFile);
    add_common(b, boot.common);

    TableArgs fit;
    auto* f = app.add_subcommand("fit", "Fit and compare copula families on (p1, p2)");
    add_table_options(f, fit);
    add_common(f, fit.common);

    TestArgs test;
    auto* t = app.add_subcommand("test", "Run Storey or a two-stage procedure and write decisions");
    add_table_options(t, test.table);
    add_common(t, test.table.common);
    t->add_option("--method", test.method, "H, S or storey")
        ->check(CLI::IsMember({"H", "S", "storey"}))
        ->capture_default_str();
    t->add_option("--alpha", test.alpha, "Target FDR")->check(CLI::Range(0.0, 0.999999))->capture_default_str();
    t->add_option("--lambda", test.lambda, "Storey tuning parameter")
        ->check(CLI::Range(1e-9, 1.0 - 1e-9))
        ->capture_default_str();
    t->add_option("--copula", test.copula, "auto, FAMILY, FAMILY:THETA or FAMILY:ROTATION:THETA")
        ->capture_default_str();
    t->add_option("--gamma1-grid", test.grid, "default, a comma list, or start:stop:step")->capture_default_str();

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Monte Carlo FDR/TPR tables and copula selection studies");
    s->add_option("--config", sim.config, "JSON configuration; flags override its keys")->check(CLI::ExistingFile);
    add_common(s, sim.common);
    s->add_option("--study", sim.study, "cell, misspecification or selection")
        ->check(CLI::IsMember({"cell", "misspecification", "selection"}));
    s->add_option("--mode", sim.mode, "Misspecification analysis: fixed, fitted or selected")
        ->check(CLI::IsMember({"fixed", "fitted", "selected"}));
    s->add_option("--fit-above", sim.fit_above, "Refit copulas only on pairs with p2 above this value");
    s->add_option("--families", sim.families, "Comma separated analysis or candidate families");
    s->add_option("--alpha", sim.alpha, "Target FDR");
    s->add_option("--lambda", sim.lambda, "Storey tuning parameter");
    s->add_option("--p0", sim.p0, "Proportion of null hypotheses");
    s->add_option("--gamma1-grid", sim.grid, "default, a comma list, or start:stop:step");
    s->add_option("--K", sim.K, "Replicates per cell");
    s->add_option("--M", sim.M, "Hypotheses per replicate");
    s->add_option("--mu", sim.mu, "Effect size(s)")->delimiter(',');
    s->add_option("--tau", sim.tau, "Kendall tau value(s) of the dependence copula")->delimiter(',');
    s->add_option("--n", sim.n, "Sample size of the selection study");
    s->add_option("--reps", sim.reps, "Repetitions of the selection study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (b->parsed()) return cmd_bootstrap(boot);
        if (f->parsed()) return cmd_fit(fit);
        if (t->parsed()) return cmd_test(test);
        if (s->parsed()) return cmd_simulate(sim);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

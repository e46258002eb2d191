#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <zlib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "twostage/ingest.hpp"
#include "twostage/procedure.hpp"
#include "twostage/simulate.hpp"
#include "twostage/tsv.hpp"

namespace fs = std::filesystem;
using namespace twostage;

namespace {

const std::string kCli = TWOSTAGE_CLI;
const std::string kData = TWOSTAGE_TEST_DATA_DIR;

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("twostage_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
    const int status = std::system((kCli + " " + args + " >" + log + " 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Statistics file from one simulated data set.
std::string write_statistics(const Scratch& s, std::size_t m) {
    SimulationConfig cfg;
    cfg.M = m;
    const auto d = generate_dataset(cfg, 42);
    std::ofstream out(s / "stats.tsv");
    out << "id\tbeta_hat\ty\n";
    for (const auto& h : d.table.rows) out << h.id << '\t' << format_double(h.beta_hat) << '\t' << format_double(h.y) << '\n';
    return s / "stats.tsv";
}

std::vector<std::string> rejected_column(const std::string& decisions) {
    const auto t = read_tsv(decisions);
    const std::size_t c = t.column({"rejected"});
    std::vector<std::string> out;
    for (const auto& row : t.rows) out.push_back(row[c]);
    return out;
}

}  // namespace

TEST_CASE("every subcommand has --help") {
    for (const char* cmd : {"", "bootstrap", "fit", "test", "simulate"}) {
        INFO(cmd);
        CHECK(run(std::string(cmd) + " --help") == 0);
    }
}

TEST_CASE("invalid flags exit nonzero and write nothing") {
    Scratch s;
    const auto stats = write_statistics(s, 200);
    const std::string out = s / "out";
    CHECK(run("test --in " + stats + " --alpha 2 --out-dir " + out) != 0);
    CHECK(run("test --in " + stats + " --method X --out-dir " + out) != 0);
    CHECK(run("test --in " + stats + " --copula nosuch --out-dir " + out) != 0);
    CHECK(run("test --in " + stats + " --gamma1-grid 0.5,1.5 --out-dir " + out) != 0);
    CHECK(run("test --in " + stats + " --bogus 1 --out-dir " + out) != 0);
    CHECK(run("bootstrap --in " + s / "missing.tsv" + " --out-dir " + out) != 0);
    CHECK(run("simulate --K 0 --out-dir " + out) != 0);
    CHECK(run("simulate --tau 0.5 --out-dir " + out) != 0);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("bootstrap writes the reference fold changes; gzip input gives the same bytes") {
    Scratch s;
    REQUIRE(run("bootstrap --in " + kData + "/counts_fixture.tsv --out-dir " + s / "a") == 0);
    const auto got = read_tsv(s / "a/fold_changes.tsv");
    const auto want = read_tsv(kData + "/counts_fixture_expected.tsv");
    REQUIRE(got.rows.size() == want.rows.size());
    for (std::size_t i = 0; i < got.rows.size(); ++i) {
        CHECK(got.rows[i][0] == want.rows[i][0]);
        CHECK(parse_double(got.rows[i][1], "b") == doctest::Approx(parse_double(want.rows[i][1], "b")).epsilon(1e-13));
        CHECK(std::abs(parse_double(got.rows[i][2], "s") - parse_double(want.rows[i][2], "s")) < 1e-12);
    }
    CHECK(slurp(s / "a/fold_changes.tsv").rfind("# twostage bootstrap seed=20240001", 0) == 0);

    const std::string text = slurp(kData + "/counts_fixture.tsv");
    const std::string gz = s / "counts.tsv.gz";
    gzFile f = gzopen(gz.c_str(), "wb");
    gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    REQUIRE(run("bootstrap --in " + gz + " --out-dir " + s / "b") == 0);
    const auto body = [](std::string t) { return t.substr(t.find('\n')); };  // header names the input file
    CHECK(body(slurp(s / "a/fold_changes.tsv")) == body(slurp(s / "b/fold_changes.tsv")));

    std::ofstream(s / "empty.tsv") << "";
    CHECK(run("bootstrap --in " + s / "empty.tsv" + " --out-dir " + s / "c") != 0);
}

TEST_CASE("test: outputs, seed header and agreement with the library") {
    Scratch s;
    const auto stats = write_statistics(s, 1500);
    REQUIRE(run("test --in " + stats + " --method H --copula clayton:r90:1.3333333333333333 --out-dir " + s / "h") == 0);
    for (const char* f : {"decisions.tsv", "outcome.json", "gamma1_curve.tsv"}) CHECK(fs::exists(s / (std::string("h/") + f)));
    CHECK(slurp(s / "h/decisions.tsv").rfind("# twostage test seed=20240001", 0) == 0);
    const auto j = nlohmann::json::parse(slurp(s / "h/outcome.json"));
    CHECK(j.at("seed") == kDefaultSeed);

    const auto table = read_statistics(stats, NullMixture::standard_normal());
    const auto lib = run_two_stage_H(table, CopulaModel(Family::Clayton, Rotation::R90, 4.0 / 3.0), 0.05, 0.5,
                                     default_gamma1_grid());
    CHECK(j.at("rejected_count").get<std::size_t>() == lib.rejected_count);
    const auto col = rejected_column(s / "h/decisions.tsv");
    for (std::size_t i = 0; i < col.size(); ++i) CHECK((col[i] == "1") == (lib.rejected[i] != 0));
    CHECK(read_tsv(s / "h/gamma1_curve.tsv").rows.size() == default_gamma1_grid().size());
}

TEST_CASE("test: independence with S equals storey; alpha = 0 rejects nothing") {
    Scratch s;
    const auto stats = write_statistics(s, 1500);
    REQUIRE(run("test --in " + stats + " --method S --copula independence --out-dir " + s / "s") == 0);
    REQUIRE(run("test --in " + stats + " --method storey --out-dir " + s / "st") == 0);
    CHECK(rejected_column(s / "s/decisions.tsv") == rejected_column(s / "st/decisions.tsv"));
    CHECK_FALSE(fs::exists(s / "st/gamma1_curve.tsv"));

    REQUIRE(run("test --in " + stats + " --method H --alpha 0 --out-dir " + s / "z") == 0);
    CHECK(nlohmann::json::parse(slurp(s / "z/outcome.json")).at("rejected_count") == 0);
    CHECK(fs::exists(s / "z/selection.json"));  // --copula auto records the selection
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
    Scratch s;
    const auto stats = write_statistics(s, 1000);
    REQUIRE(run("test --in " + stats + " --method H --out-dir " + s / "a") == 0);
    REQUIRE(run("test --in " + stats + " --method H --threads 3 --out-dir " + s / "b") == 0);
    for (const char* f : {"decisions.tsv", "outcome.json", "gamma1_curve.tsv", "selection.json"})
        CHECK(slurp(s / (std::string("a/") + f)) == slurp(s / (std::string("b/") + f)));
    REQUIRE(run("simulate --K 2 --M 400 --out-dir " + s / "c") == 0);
    REQUIRE(run("simulate --K 2 --M 400 --threads 2 --out-dir " + s / "d") == 0);
    CHECK(slurp(s / "c/simtable.tsv") == slurp(s / "d/simtable.tsv"));
    CHECK(slurp(s / "c/simulation.json") == slurp(s / "d/simulation.json"));
}

TEST_CASE("fit: selection table and the n >= 10 requirement") {
    Scratch s;
    const auto stats = write_statistics(s, 1000);
    REQUIRE(run("fit --in " + stats + " --fit-above 0.5 --out-dir " + s / "f", s / "fit.log") == 0);
    const auto j = nlohmann::json::parse(slurp(s / "f/selection.json"));
    CHECK(j.at("candidates").size() == 5);
    CHECK(j.at("winner").at("bic") == "Clayton");
    CHECK(slurp(s / "fit.log").find("selected by BIC") != std::string::npos);

    std::ofstream(s / "tiny.tsv") << "id\tbeta_hat\ty\na\t0.1\t1\nb\t0.2\t2\n";
    CHECK(run("fit --in " + s / "tiny.tsv" + " --out-dir " + s / "g") != 0);
}

TEST_CASE("simulate: config file, unknown keys, flag precedence, selection study") {
    Scratch s;
    std::ofstream(s / "cfg.json") << R"({"study": "cell", "M": 300, "K": 1, "mu": [2.0, 3.0], "seed": 7})";
    REQUIRE(run("simulate --config " + s / "cfg.json" + " --K 2 --out-dir " + s / "a") == 0);
    const auto t = read_tsv(s / "a/simtable.tsv");
    CHECK(t.rows.size() == 6);
    for (const auto& row : t.rows) CHECK(row[8] == "2");
    CHECK(slurp(s / "a/simtable.tsv").rfind("# twostage simulate seed=7", 0) == 0);

    std::ofstream(s / "bad.json") << R"({"study": "cell", "replicates": 3})";
    CHECK(run("simulate --config " + s / "bad.json" + " --out-dir " + s / "b") != 0);
    CHECK_FALSE(fs::exists(s / "b"));

    REQUIRE(run("simulate --study selection --n 300 --reps 2 --out-dir " + s / "c") == 0);
    const auto j = nlohmann::json::parse(slurp(s / "c/selection.json"));
    std::size_t wins = 0;
    for (const auto& r : j.at("selection").at("rows")) wins += r.at("selected").at("bic").get<std::size_t>();
    CHECK(wins == 2);

    REQUIRE(run("simulate --study misspecification --mode fixed --families clayton,joe --K 1 --M 300 --out-dir " +
                s / "d") == 0);
    CHECK(read_tsv(s / "d/simtable.tsv").rows.size() == 5);
}

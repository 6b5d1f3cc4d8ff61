#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "surf/cli.hpp"
#include "surf/experiments.hpp"

using namespace surf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"surf"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("surf_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("help lists every flag") {
    const std::vector<std::string> common{"--config", "--dist", "--alpha", "--p", "--pmf", "--k", "--horizon", "--n",
                                          "--leaf-config", "--config-i", "--config-ii", "--config-iii", "--seed",
                                          "--out-dir", "--quiet"};
    const std::vector<std::pair<std::string, std::vector<std::string>>> subs{
        {"simulate", {"--with-delays"}},
        {"renewal", {"--n-max", "--method", "--min-of"}},
        {"analyze", {"--vertex"}},
        {"export-graph", {"--format"}},
        {"experiment", {"--kind", "--n-probe", "--alphas", "--runs", "--jobs", "--stride"}},
        {"regime-matrix", {"--ks", "--alphas", "--runs", "--jobs", "--stride"}}};
    for (const auto& [sub, extra] : subs) {
        const auto r = run({sub, "--help"});
        INFO(sub << "\n" << r.out);
        CHECK(r.code == 0);
        for (const auto& flag : common) CHECK(r.out.find(flag) != std::string::npos);
        for (const auto& flag : extra) CHECK(r.out.find(flag) != std::string::npos);
    }
    const auto top = run({"--help"});
    CHECK(top.code == 0);
    for (const char* sub : {"simulate", "renewal", "analyze", "export-graph", "experiment", "regime-matrix"})
        CHECK(top.out.find(sub) != std::string::npos);
}

TEST_CASE("usage and config errors exit with 2") {
    const auto dir = scratch("errors");
    const auto o = dir.string();
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"simulate", "--bogus", "-o", o}).code == 2);
    CHECK(run({"simulate", "--k", "two", "-o", o}).code == 2);
    CHECK(run({"simulate", "--dist", "cauchy", "-o", o}).code == 2);
    CHECK(run({"simulate", "--config", (dir / "missing.json").string(), "-o", o}).code == 2);
    CHECK(run({"simulate", "--config-i", "--config-iii", "-o", o}).code == 2);
    CHECK(run({"export-graph", "--format", "svg", "-o", o}).code == 2);

    const auto bad_alpha = run({"simulate", "--alpha", "-0.5", "-o", o});
    CHECK(bad_alpha.code == 2);
    CHECK(bad_alpha.err.find("dist.alpha") != std::string::npos);

    const auto bad_k = run({"simulate", "--k", "1", "-o", o});
    CHECK(bad_k.code == 2);
    CHECK(bad_k.err.find("k:") != std::string::npos);

    // Monte Carlo subcommands refuse to pick a seed silently.
    const auto no_seed = run({"experiment", "--kind", "renewal-mc", "-o", o});
    CHECK(no_seed.code == 2);
    CHECK(no_seed.err.find("seed") != std::string::npos);
    CHECK(run({"regime-matrix", "--n", "100", "-o", o}).code == 2);
    CHECK(run({"experiment", "--kind", "renewal-mc", "--seed", "1", "--n-probe", "5000", "-o", o}).code == 2);

    std::ofstream(dir / "broken.json") << "{ not json";
    const auto broken = run({"simulate", "--config", (dir / "broken.json").string(), "-o", o});
    CHECK(broken.code == 2);
    CHECK(broken.err.find("config") != std::string::npos);

    std::ofstream(dir / "typo.json") << R"({"horizn": 10})";
    const auto typo = run({"simulate", "--config", (dir / "typo.json").string(), "-o", o});
    CHECK(typo.code == 2);
    CHECK(typo.err.find("horizn") != std::string::npos);

    // An output directory that cannot be created.
    std::ofstream(dir / "plainfile") << "x";
    CHECK(run({"simulate", "--n", "5", "-o", (dir / "plainfile" / "sub").string()}).code == 2);
}

TEST_CASE("simulate writes the trajectory CSV") {
    const auto dir = scratch("simulate");
    const auto r = run({"simulate", "--alpha", "0.6", "--k", "2", "--n", "100000", "--config-iii", "--seed", "42", "-o",
                        dir.string()});
    REQUIRE(r.code == 0);
    CHECK(line_count(r.out) == 1);
    const auto csv = slurp(dir / "trajectory.csv");
    CHECK(csv.rfind("n,C_n,V_n\n", 0) == 0);
    CHECK(line_count(csv) == 100'001);
    CHECK(csv.find('\r') == std::string::npos);

    const DelayDistribution d(ZetaPareto{0.6});
    const auto t = simulate(d, 2, 100'000, LeafPool::from_master(LeafConfig::IidUniform, 42), 42, false);
    CHECK(csv == trajectory_csv(t, false));

    const auto meta = json::parse(slurp(dir / "trajectory.csv.meta.json"));
    CHECK(meta["subcommand"] == "simulate");
    CHECK(meta["effective_config"]["seed"] == 42);
    CHECK(meta["effective_config"]["config"] == to_string(LeafConfig::IidUniform));
    CHECK(meta["effective_config"]["dist"]["alpha"] == 0.6);
    CHECK(meta["argv"].size() == 13);
    CHECK(meta.contains("created_utc"));
    CHECK_FALSE(fs::exists(dir / "trajectory.csv.tmp"));
}

TEST_CASE("outputs are byte identical across invocations") {
    const auto a = scratch("ident_a");
    const auto b = scratch("ident_b");
    for (const auto& dir : {a, b}) {
        REQUIRE(run({"simulate", "--alpha", "0.3", "--n", "2000", "--seed", "5", "--with-delays", "-q", "-o", dir.string()}).code == 0);
        REQUIRE(run({"experiment", "--kind", "mean-v", "--alphas", "1.2,0.3", "--n", "2000", "--runs", "16", "--stride", "20",
                     "--seed", "9", "-q", "-o", dir.string(), "--jobs", dir == a ? "1" : "3"})
                    .code == 0);
        REQUIRE(run({"export-graph", "--alpha", "0.3", "--n", "150", "--format", "json", "--seed", "7", "-q", "-o", dir.string()})
                    .code == 0);
    }
    for (const char* name : {"trajectory.csv", "mean_v_zeta_pareto_alpha1.2.csv", "mean_v_zeta_pareto_alpha0.3.csv", "subgraph.json"}) {
        INFO(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    const auto quiet = run({"simulate", "--n", "10", "-q", "-o", a.string()});
    CHECK(quiet.out.empty());
}

TEST_CASE("config file values and flag overrides") {
    const auto dir = scratch("config");
    std::ofstream(dir / "run.json") << R"({"dist": {"kind": "geometric", "p": 0.5}, "horizon": 50, "seed": 3, "k": 3})";
    const auto cfg = (dir / "run.json").string();

    REQUIRE(run({"simulate", "--config", cfg, "-q", "-o", dir.string()}).code == 0);
    CHECK(line_count(slurp(dir / "trajectory.csv")) == 51);
    auto meta = json::parse(slurp(dir / "trajectory.csv.meta.json"));
    CHECK(meta["effective_config"]["k"] == 3);
    CHECK(meta["effective_config"]["dist"]["kind"] == "geometric");

    REQUIRE(run({"simulate", "--config", cfg, "--n", "30", "--p", "0.25", "-q", "-o", dir.string()}).code == 0);
    CHECK(line_count(slurp(dir / "trajectory.csv")) == 31);
    meta = json::parse(slurp(dir / "trajectory.csv.meta.json"));
    CHECK(meta["effective_config"]["dist"]["p"] == 0.25);
    CHECK(meta["effective_config"]["seed"] == 3);

    // A new kind replaces the file's distribution object.
    REQUIRE(run({"simulate", "--config", cfg, "--dist", "zeta_pareto", "--alpha", "0.6", "-q", "-o", dir.string()}).code == 0);
    meta = json::parse(slurp(dir / "trajectory.csv.meta.json"));
    CHECK(meta["effective_config"]["dist"] == json({{"kind", "zeta_pareto"}, {"alpha", 0.6}}));

    // An alpha on top of a geometric file law is a mismatch, not a guess.
    const auto clash = run({"simulate", "--config", cfg, "--alpha", "0.6", "-o", dir.string()});
    CHECK(clash.code == 2);
    CHECK(clash.err.find("dist.alpha") != std::string::npos);

    // The file's seed satisfies the Monte Carlo seed requirement.
    CHECK(run({"experiment", "--config", cfg, "--kind", "renewal-mc", "--runs", "2000", "--n-probe", "40", "-q", "-o",
               dir.string()})
              .code == 0);
}

TEST_CASE("renewal subcommand") {
    const auto dir = scratch("renewal");
    const auto r = run({"renewal", "--dist", "zeta_pareto", "--alpha", "0.3", "--n-max", "100000", "-o", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("converged") != std::string::npos);
    const auto csv = slurp(dir / "renewal.csv");
    CHECK(line_count(csv) == 100'002);
    CHECK(csv.rfind("n,r_n,partial_square_sum\n0,1,1\n", 0) == 0);

    REQUIRE(run({"renewal", "--pmf", "0.5,0.5", "--n-max", "3", "--method", "direct", "-q", "-o", dir.string()}).code == 0);
    CHECK(slurp(dir / "renewal.csv") == "n,r_n,partial_square_sum\n0,1,1\n1,0.5,1.25\n2,0.75,1.8125\n3,0.625,2.203125\n");

    // Minimum of two Geometric(1/2) delays is Geometric(3/4).
    REQUIRE(run({"renewal", "--p", "0.5", "--min-of", "2", "--n-max", "5", "-q", "-o", dir.string()}).code == 0);
    const auto min_csv = slurp(dir / "renewal.csv");
    CHECK(min_csv.find("\n5,0.75,") != std::string::npos);
    CHECK(run({"renewal", "--min-of", "0", "-o", dir.string()}).code == 2);
}

TEST_CASE("analyze and export-graph") {
    const auto dir = scratch("graph");
    const auto a = run({"analyze", "--alpha", "0.6", "--n", "3000", "--seed", "4", "--vertex", "2500", "-o", dir.string()});
    REQUIRE(a.code == 0);
    const auto j = json::parse(slurp(dir / "analysis.json"));
    CHECK(j["vertex"] == 2500);
    CHECK(j["brute_force_agrees"] == true);
    CHECK(j["reach"]["lambda"].get<std::int64_t>() >= 1);
    CHECK(j["z_chain_terminals"].size() == 2);
    CHECK(run({"analyze", "--n", "10", "--vertex", "11", "-o", dir.string()}).code == 2);

    const auto g = run({"export-graph", "--alpha", "0.3", "--n", "150", "--format", "dot", "--seed", "7", "-o", dir.string()});
    REQUIRE(g.code == 0);
    const auto dot = slurp(dir / "subgraph.dot");
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("  150 [") != std::string::npos);

    const DelayDistribution d(ZetaPareto{0.3});
    const auto t = simulate(d, 2, 150, LeafPool::from_master(LeafConfig::IidUniform, 7), 7);
    CHECK(dot == to_dot(build_subgraph(t, 150)));
}

TEST_CASE("experiment and regime-matrix outputs") {
    const auto dir = scratch("experiment");
    const auto o = dir.string();
    REQUIRE(run({"experiment", "--kind", "single-trajectory", "--alphas", "1.2,0.6,0.3", "--n", "5000", "--stride", "50",
                 "--seed", "3", "-q", "-o", o})
                .code == 0);
    for (const char* a : {"1.2", "0.6", "0.3"}) {
        const auto csv = slurp(dir / ("v_trace_zeta_pareto_alpha" + std::string(a) + ".csv"));
        CHECK(csv.rfind("n,V_n,C_n\n50,", 0) == 0);
        CHECK(line_count(csv) == 101);
    }

    const auto mc = run({"experiment", "--kind", "renewal-mc", "--p", "0.5", "--runs", "4000", "--n-probe", "500", "--seed", "8", "-o", o});
    CHECK(mc.code == 0);
    const auto check = json::parse(slurp(dir / "renewal_check.json"));
    CHECK(check["result"]["predicted"].get<double>() == doctest::Approx(0.5));
    CHECK(check["config"]["seed"] == 8);

    const auto jc = run({"experiment", "--kind", "j-expectation", "--alpha", "0.6", "--n", "500", "--runs", "200", "--seed", "8", "-o", o});
    CHECK(jc.code == 0);
    CHECK(json::parse(slurp(dir / "j_check.json"))["result"]["agrees"] == true);

    const auto rm = run({"regime-matrix", "--p", "0.5", "--n", "1000", "--runs", "20", "--ks", "2,3", "--seed", "1", "-o", o});
    const auto report = json::parse(slurp(dir / "regime_report.json"));
    REQUIRE(report.size() == 2);
    CHECK(report[1]["config"]["k"] == 3);
    const bool failed = report[0]["failed"].get<bool>() || report[1]["failed"].get<bool>();
    CHECK(rm.code == (failed ? 1 : 0));
    CHECK(run({"regime-matrix", "--ks", "1", "--seed", "1", "-o", o}).code == 2);
}

#include "surf/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "surf/experiments.hpp"

namespace surf {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Raised when an output cannot be written. Treated as a usage error.
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand that builds an ExperimentConfig. Values are
// only applied when the flag was given, so file values survive otherwise.
struct ConfigFlags {
    std::string config_path;
    std::string dist_kind;
    double alpha = 0;
    double p = 0;
    std::vector<double> pmf;
    std::vector<double> alphas;
    int k = 0;
    std::int64_t horizon = 0;
    std::string leaf_config;
    bool config_i = false, config_ii = false, config_iii = false;
    std::int64_t runs = 0;
    std::uint64_t seed = 0;
    std::int64_t stride = 0;
    int jobs = 0;

    std::map<std::string, CLI::Option*> opts;

    bool given(const std::string& name) const {
        const auto it = opts.find(name);
        return it != opts.end() && it->second->count() > 0;
    }

    void attach(CLI::App* app, bool multi_law, bool monte_carlo) {
        opts["config"] = app->add_option("--config", config_path, "JSON config file; flags override its values")
                             ->check(CLI::ExistingFile);
        opts["dist.kind"] = app->add_option("--dist,--dist.kind", dist_kind, "Delay law")
                                ->check(CLI::IsMember({"zeta_pareto", "inverse_power", "geometric", "table"}));
        opts["dist.alpha"] = app->add_option("--alpha,--dist.alpha", alpha, "Pareto tail index");
        opts["dist.p"] = app->add_option("--p,--dist.p", p, "Geometric success probability");
        opts["dist.pmf"] = app->add_option("--pmf,--dist.pmf", pmf, "Table pmf on 1..m (comma separated)")->delimiter(',');
        if (multi_law)
            opts["alphas"] = app->add_option("--alphas", alphas, "One series per Pareto index (comma separated)")->delimiter(',');
        opts["k"] = app->add_option("--k", k, "Number of choices");
        opts["horizon"] = app->add_option("--n,--horizon", horizon, "Number of steps N");
        opts["leaf-config"] = app->add_option("--leaf-config", leaf_config, "Leaf preferences: increasing, decreasing or iid");
        opts["config-i"] = app->add_flag("--config-i", config_i, "Shorthand for --leaf-config increasing");
        opts["config-ii"] = app->add_flag("--config-ii", config_ii, "Shorthand for --leaf-config decreasing");
        opts["config-iii"] = app->add_flag("--config-iii", config_iii, "Shorthand for --leaf-config iid");
        opts["seed"] = app->add_option("--seed", seed, monte_carlo ? "Master seed (required)" : "Master seed (default 0)");
        if (monte_carlo) {
            opts["runs"] = app->add_option("--runs", runs, "Independent runs");
            opts["jobs"] = app->add_option("--jobs", jobs, "Worker threads; 0 uses every core. Results do not depend on it");
        }
        if (multi_law) opts["stride"] = app->add_option("--stride", stride, "Sampling stride for V_n series");
    }

    ExperimentConfig build(ExperimentConfig defaults) const {
        json j = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ConfigError("config", std::string("cannot parse ") + config_path + ": " + e.what());
            }
            if (!j.is_object()) throw ConfigError("config", "top level must be an object");
        }
        if (given("dist.kind") || given("dist.alpha") || given("dist.p") || given("dist.pmf")) {
            json d = j.contains("dist") && j["dist"].is_object() ? j["dist"] : json::object();
            std::string kind = given("dist.kind") ? dist_kind : d.value("kind", std::string{});
            if (kind.empty()) kind = given("dist.p") ? "geometric" : given("dist.pmf") ? "table" : "zeta_pareto";
            if (d.value("kind", std::string{}) != kind) d = json::object();
            d["kind"] = kind;
            if (given("dist.alpha")) d["alpha"] = alpha;
            if (given("dist.p")) d["p"] = p;
            if (given("dist.pmf")) d["pmf"] = pmf;
            j["dist"] = d;
        }
        if (given("alphas")) j["alphas"] = alphas;
        if (given("k")) j["k"] = k;
        if (given("horizon")) j["horizon"] = horizon;
        const int shorthand = int(config_i) + int(config_ii) + int(config_iii);
        if (shorthand > 1 || (shorthand == 1 && given("leaf-config")))
            throw ConfigError("config", "choose one leaf configuration");
        if (given("leaf-config")) j["config"] = leaf_config;
        if (config_i) j["config"] = "increasing";
        if (config_ii) j["config"] = "decreasing";
        if (config_iii) j["config"] = "iid";
        if (given("seed")) j["seed"] = seed;
        if (given("runs")) j["runs"] = runs;
        if (given("stride")) j["stride"] = stride;
        if (given("jobs")) j["jobs"] = jobs;
        return config_from_json(j, std::move(defaults));
    }

    bool seed_known() const {
        if (given("seed")) return true;
        if (config_path.empty()) return false;
        std::ifstream in(config_path);
        const auto j = json::parse(in, nullptr, false);
        return j.is_object() && j.contains("seed");
    }
};

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

class OutputSink {
public:
    OutputSink(fs::path dir, std::string subcommand, std::vector<std::string> argv)
        : dir_(std::move(dir)), subcommand_(std::move(subcommand)), argv_(std::move(argv)) {}

    void set_effective(ordered_json effective) { effective_ = std::move(effective); }

    /// Writes `name` atomically and a `name.meta.json` sidecar next to it.
    fs::path write(const std::string& name, const std::string& content) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw OutputError("cannot create output directory " + dir_.string() + ": " + ec.message());
        const auto target = dir_ / name;
        atomic_write(target, content);
        ordered_json meta;
        meta["tool"] = "surf";
        meta["subcommand"] = subcommand_;
        meta["argv"] = argv_;
        meta["effective_config"] = effective_;
        meta["output"] = name;
        meta["created_utc"] = utc_timestamp();
        atomic_write(dir_ / (name + ".meta.json"), meta.dump(2) + "\n");
        return target;
    }

private:
    static void atomic_write(const fs::path& target, const std::string& content) {
        const auto tmp = fs::path(target.string() + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << content;
            out.flush();
            if (!out) throw OutputError("cannot write " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) throw OutputError("cannot move " + tmp.string() + " to " + target.string() + ": " + ec.message());
    }

    fs::path dir_;
    std::string subcommand_;
    std::vector<std::string> argv_;
    ordered_json effective_ = ordered_json::object();
};

std::string law_label(const DistributionSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZetaPareto>) return "zeta_pareto_alpha" + format_double(s.alpha);
            else if constexpr (std::is_same_v<T, InversePower>) return "inverse_power_alpha" + format_double(s.alpha);
            else if constexpr (std::is_same_v<T, Geometric>) return "geometric_p" + format_double(s.success_prob);
            else return "table" + std::to_string(s.pmf.size());
        },
        spec);
}

ordered_json reach_json(const ReachStats& s) {
    return {{"n", s.n}, {"lambda", s.lambda}, {"r_leaf", s.r_leaf}, {"l_leaf", s.l_leaf}, {"reach_size", s.reach_size}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"surf: simulator and analytics for the k-choice subtractive random forest model"};
    app.name("surf");
    app.require_subcommand(1);
    app.fallthrough(false);

    std::string out_dir = "out";
    bool quiet = false;
    auto add_io = [&](CLI::App* sub) {
        sub->add_option("-o,--out-dir", out_dir, "Directory for outputs")->capture_default_str();
        sub->add_flag("-q,--quiet", quiet, "Suppress the summary line");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate one trajectory and write n, C_n, V_n");
    ConfigFlags sim_flags;
    sim_flags.attach(sim, false, false);
    bool with_delays = false;
    sim->add_flag("--with-delays", with_delays, "Append the delay columns Z1..Zk");
    add_io(sim);

    // renewal
    auto* ren = app.add_subcommand("renewal", "Compute the renewal sequence r_0..r_N of the delay law");
    ConfigFlags ren_flags;
    ren_flags.attach(ren, false, false);
    std::int64_t n_max = 100'000;
    int min_of = 1;
    std::string method = "auto";
    ren->add_option("--n-max", n_max, "Last index N")->capture_default_str();
    ren->add_option("--min-of", min_of, "Use the law of the minimum of this many copies (v_n)")->capture_default_str();
    ren->add_option("--method", method, "auto, direct or fast")->check(CLI::IsMember({"auto", "direct", "fast"}));
    add_io(ren);

    // analyze
    auto* ana = app.add_subcommand("analyze", "Structural statistics of T_n for one simulated trajectory");
    ConfigFlags ana_flags;
    ana_flags.attach(ana, false, false);
    std::int64_t vertex = 0;
    ana->add_option("--vertex", vertex, "Vertex to analyze (default: the horizon)");
    add_io(ana);

    // export-graph
    auto* exg = app.add_subcommand("export-graph", "Export the subgraph induced by T_n");
    ConfigFlags exg_flags;
    exg_flags.attach(exg, false, false);
    std::string format = "dot";
    exg->add_option("--format", format, "dot or json")->check(CLI::IsMember({"dot", "json"}))->capture_default_str();
    add_io(exg);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Monte Carlo experiments (figure series and consistency checks)");
    ConfigFlags exp_flags;
    exp_flags.attach(exp, true, true);
    std::string kind;
    std::int64_t n_probe = 500;
    exp->add_option("--kind", kind, "single-trajectory, mean-v, renewal-mc or j-expectation")
        ->required()
        ->check(CLI::IsMember({"single-trajectory", "mean-v", "renewal-mc", "j-expectation"}));
    exp->add_option("--n-probe", n_probe, "Probe vertex for renewal-mc")->capture_default_str();
    add_io(exp);

    // regime-matrix
    auto* reg = app.add_subcommand("regime-matrix", "Finite-horizon proxies for the consistency table");
    ConfigFlags reg_flags;
    reg_flags.attach(reg, true, true);
    std::vector<int> ks;
    reg->add_option("--ks", ks, "Sweep these k values (comma separated)")->delimiter(',');
    add_io(reg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "surf: " << e.what() << "\n";
        return 2;
    }

    std::vector<std::string> args(argv, argv + argc);
    auto* sub = app.get_subcommands().front();
    OutputSink sink(out_dir, sub->get_name(), args);
    auto say = [&](const std::string& line) {
        if (!quiet) out << line << "\n";
    };

    try {
        if (sub == sim) {
            const auto cfg = sim_flags.build({});
            sink.set_effective(to_json(cfg));
            const auto t = simulate(DelayDistribution(cfg.dist), cfg.k, cfg.horizon,
                                    LeafPool::from_master(cfg.config, cfg.master_seed), cfg.master_seed, with_delays);
            const auto path = sink.write("trajectory.csv", trajectory_csv(t, with_delays));
            say("simulate: " + std::to_string(cfg.horizon) + " steps, C_N = " + std::to_string(t.color(cfg.horizon)) +
                ", V_N = " + format_double(t.value(cfg.horizon)) + " -> " + path.string());
            return 0;
        }
        if (sub == ren) {
            const auto cfg = ren_flags.build({});
            if (n_max < 1) throw ConfigError("n-max", "must be at least 1");
            if (min_of < 1) throw ConfigError("min-of", "must be at least 1");
            auto effective = to_json(cfg);
            effective["n_max"] = n_max;
            effective["min_of"] = min_of;
            sink.set_effective(effective);
            const DelayDistribution dist = DelayDistribution(cfg.dist).min_of(min_of);
            const auto m = method == "direct" ? RenewalMethod::Direct : method == "fast" ? RenewalMethod::Fast : RenewalMethod::Auto;
            const auto seq = renewal_sequence(dist, n_max, m);
            const auto path = sink.write("renewal.csv", renewal_csv(seq));
            std::string line = "renewal: r_N = " + format_double(seq[n_max]) + ", limit " + format_double(seq.limit_prediction) +
                               (seq.aperiodic ? "" : " (periodic law: limit does not apply)");
            if (n_max >= 100) {
                const auto diag = squared_sum_diagnostic(seq);
                line += ", sum r_n^2 = " + format_double(diag.partial) + " (" + to_string(diag.verdict) + ", exponent " +
                        format_double(diag.growth_rate) + ")";
            }
            say(line + " -> " + path.string());
            return 0;
        }
        if (sub == ana) {
            const auto cfg = ana_flags.build({});
            const Vertex v = vertex == 0 ? cfg.horizon : vertex;
            if (v < 1 || v > cfg.horizon) throw ConfigError("vertex", "must lie in [1, horizon]");
            sink.set_effective(to_json(cfg));
            const auto t = simulate(DelayDistribution(cfg.dist), cfg.k, cfg.horizon,
                                    LeafPool::from_master(cfg.config, cfg.master_seed), cfg.master_seed);
            const auto s = reach_stats(t, v);
            const auto [bc, bv] = brute_force_cv(t, v);
            const bool consistent = bc == t.color(v) && bv == t.value(v);
            const auto les = longest_edge_leaf_stats(t, v);
            const auto coal = coalescence_estimate(t);
            ordered_json j;
            j["schema"] = "surf.analysis";
            j["version"] = 1;
            j["config"] = to_json(cfg);
            j["vertex"] = v;
            j["reach"] = reach_json(s);
            j["color"] = t.color(v);
            j["value"] = t.value(v);
            j["brute_force_agrees"] = consistent;
            j["min_chain_terminal"] = chain(t, v, ChainKind::min_chain()).terminal_leaf;
            ordered_json z = ordered_json::array();
            for (int c = 0; c < t.k(); ++c) z.push_back(chain(t, v, ChainKind::z_chain(c)).terminal_leaf);
            j["z_chain_terminals"] = z;
            j["j_count"] = j_count(t, v);
            j["longest_edge_distinct_leaves"] = les.distinct_leaves;
            j["coalescence_estimate"] = coal ? ordered_json(*coal) : ordered_json(nullptr);
            const auto path = sink.write("analysis.json", j.dump(2) + "\n");
            say("analyze: n = " + std::to_string(v) + ", Lambda = " + std::to_string(s.lambda) + ", R = " +
                std::to_string(s.r_leaf) + ", L = " + std::to_string(s.l_leaf) +
                (consistent ? "" : ", BRUTE-FORCE MISMATCH") + " -> " + path.string());
            return consistent ? 0 : 1;
        }
        if (sub == exg) {
            const auto cfg = exg_flags.build({});
            sink.set_effective(to_json(cfg));
            const auto t = simulate(DelayDistribution(cfg.dist), cfg.k, cfg.horizon,
                                    LeafPool::from_master(cfg.config, cfg.master_seed), cfg.master_seed);
            const auto g = build_subgraph(t, cfg.horizon);
            const auto path = sink.write("subgraph." + format, format == "dot" ? to_dot(g) : to_json(g));
            std::int64_t leaves = 0;
            for (const auto& vtx : g.vertices) leaves += vtx.role == VertexRole::Leaf;
            say("export-graph: " + std::to_string(g.vertices.size()) + " vertices (" + std::to_string(leaves) + " leaves), " +
                std::to_string(g.edges.size()) + " edges -> " + path.string());
            return 0;
        }
        if (sub == exp || sub == reg) {
            auto& flags = sub == exp ? exp_flags : reg_flags;
            if (!flags.seed_known()) throw ConfigError("seed", "is required for Monte Carlo runs");
            ExperimentConfig defaults;
            if (sub == exp && kind != "j-expectation" && kind != "renewal-mc") {
                defaults.horizon = 100'000;
                defaults.runs = kind == "mean-v" ? 1000 : 1;
                defaults.alphas = {1.2, 0.6, 0.3};
                defaults.dist = ZetaPareto{1.2};
            }
            if (sub == exp && kind == "j-expectation") defaults.runs = 500;
            if (sub == exp && kind == "renewal-mc") defaults.runs = 10'000;
            const auto cfg = flags.build(defaults);
            auto effective = to_json(cfg);
            if (sub == exp) effective["kind"] = kind;
            sink.set_effective(effective);

            if (sub == reg) {
                std::vector<ExperimentConfig> cfgs;
                if (!ks.empty()) {
                    for (int k : ks)
                        if (k < 2) throw ConfigError("ks", "entries must be at least 2");
                }
                for (const auto& law : cfg.laws()) {
                    auto c = cfg;
                    c.alphas.clear();
                    c.dist = law;
                    if (ks.empty()) cfgs.push_back(c);
                    for (int k : ks) {
                        c.k = k;
                        cfgs.push_back(c);
                    }
                }
                ordered_json reports = ordered_json::array();
                bool failed = false;
                for (const auto& c : cfgs) {
                    const auto r = run_regime_matrix(c);
                    failed = failed || r.any_failed();
                    reports.push_back(to_json(r));
                    if (!quiet) {
                        out << DelayDistribution(c.dist).describe() << ", k = " << c.k << ": " << to_string(r.regime.label) << "\n";
                        for (const auto& cell : r.cells)
                            out << "  " << std::left << std::setw(26) << cell.statistic << std::setw(14) << to_string(cell.verdict)
                                << "expected " << to_string(cell.expected) << ", observed " << to_string(cell.observed) << "\n";
                        out << "  " << std::left << std::setw(26) << r.dip_detection.statistic << std::setw(14)
                            << to_string(r.dip_detection.verdict) << r.dip_detection.summary << "\n";
                    }
                }
                const auto path = sink.write("regime_report.json", reports.dump(2) + "\n");
                say(std::string("regime-matrix: ") + (failed ? "FAILED" : "no failed cells") + " -> " + path.string());
                return failed ? 1 : 0;
            }

            if (kind == "single-trajectory") {
                for (const auto& trace : run_single_trajectory(cfg)) {
                    const auto path = sink.write("v_trace_" + law_label(trace.law) + ".csv", v_trace_csv(trace));
                    say("experiment: V_N = " + format_double(trace.samples.empty() ? 0.0 : trace.samples.back().value) + " -> " +
                        path.string());
                }
                return 0;
            }
            if (kind == "mean-v") {
                for (const auto& trace : run_mean_v(cfg)) {
                    const auto path = sink.write("mean_v_" + law_label(trace.law) + ".csv", mean_v_csv(trace));
                    say("experiment: mean V_N = " + format_double(trace.mean.empty() ? 0.0 : trace.mean.back()) + " -> " +
                        path.string());
                }
                return 0;
            }
            MonteCarloCheck check;
            std::string name;
            if (kind == "renewal-mc") {
                if (n_probe < 1 || n_probe > 2000) throw ConfigError("n-probe", "must lie in [1, 2000]");
                check = monte_carlo_renewal_check(DelayDistribution(cfg.dist), n_probe, cfg.runs, cfg.master_seed, cfg.jobs);
                name = "renewal_check.json";
                effective["n_probe"] = n_probe;
                sink.set_effective(effective);
            } else {
                check = j_expectation_check(cfg);
                name = "j_check.json";
            }
            ordered_json j;
            j["schema"] = "surf.monte_carlo_check";
            j["version"] = 1;
            j["kind"] = kind;
            j["config"] = effective;
            j["result"] = to_json(check);
            const auto path = sink.write(name, j.dump(2) + "\n");
            say("experiment: empirical " + format_double(check.empirical) + ", predicted " + format_double(check.predicted) +
                ", sigma " + format_double(check.sigma) + (check.agrees() ? ", agrees" : ", DISAGREES") + " -> " + path.string());
            return check.agrees() ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        err << "surf: config error: " << e.what() << "\n";
        return 2;
    } catch (const OutputError& e) {
        err << "surf: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "surf: invalid argument: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace surf

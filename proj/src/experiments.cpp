#include "surf/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "compensated_sum.hpp"

namespace surf {

using nlohmann::json;
using nlohmann::ordered_json;

// Configuration -------------------------------------------------------------------

namespace {

void check_spec(const DistributionSpec& spec, const std::string& path) {
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZetaPareto> || std::is_same_v<T, InversePower>) {
                if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) throw ConfigError(path + ".alpha", "must be a positive number");
            } else if constexpr (std::is_same_v<T, Geometric>) {
                if (!(s.success_prob > 0.0 && s.success_prob < 1.0)) throw ConfigError(path + ".p", "must lie in (0, 1)");
            } else {
                if (s.pmf.empty()) throw ConfigError(path + ".pmf", "must not be empty");
                double total = 0.0;
                for (double q : s.pmf) {
                    if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError(path + ".pmf", "entries must be nonnegative");
                    total += q;
                }
                if (std::abs(total - 1.0) > 1e-9) throw ConfigError(path + ".pmf", "entries must sum to 1");
            }
        },
        spec);
}

bool has_alpha(const DistributionSpec& spec) {
    return std::holds_alternative<ZetaPareto>(spec) || std::holds_alternative<InversePower>(spec);
}

DistributionSpec with_alpha(const DistributionSpec& spec, double alpha) {
    if (std::holds_alternative<ZetaPareto>(spec)) return ZetaPareto{alpha};
    return InversePower{alpha};
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& path) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!j.contains(key)) throw ConfigError(field, "missing");
    const auto& v = j.at(key);
    if constexpr (std::is_integral_v<T>) {
        // nlohmann converts 2.5 or -1 silently; integer keys must be exact.
        if (!v.is_number_integer()) throw ConfigError(field, "must be an integer");
        if (v.is_number_unsigned()) {
            if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
                throw ConfigError(field, "is out of range");
        } else {
            const auto x = v.get<std::int64_t>();
            if (std::is_unsigned_v<T> && x < 0) throw ConfigError(field, "must be nonnegative");
            if (std::is_signed_v<T> && (x < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
                                        x > static_cast<std::int64_t>(std::numeric_limits<T>::max())))
                throw ConfigError(field, "is out of range");
        }
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(field, "has the wrong type");
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& path) {
    for (const auto& item : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; }))
            throw ConfigError(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    check_spec(dist, "dist");
    if (k < 2) throw ConfigError("k", "must be at least 2");
    if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
    if (runs < 1) throw ConfigError("runs", "must be at least 1");
    if (stride < 1) throw ConfigError("stride", "must be at least 1");
    if (jobs < 0) throw ConfigError("jobs", "must be nonnegative");
    if (!alphas.empty() && !has_alpha(dist)) throw ConfigError("alphas", "requires a zeta_pareto or inverse_power law");
    for (double a : alphas)
        if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alphas", "entries must be positive numbers");
}

std::vector<DistributionSpec> ExperimentConfig::laws() const {
    if (alphas.empty()) return {dist};
    std::vector<DistributionSpec> out;
    for (double a : alphas) out.push_back(with_alpha(dist, a));
    return out;
}

ordered_json to_json(const DistributionSpec& spec) {
    return std::visit(
        [](const auto& s) -> ordered_json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZetaPareto>) return {{"kind", "zeta_pareto"}, {"alpha", s.alpha}};
            else if constexpr (std::is_same_v<T, InversePower>) return {{"kind", "inverse_power"}, {"alpha", s.alpha}};
            else if constexpr (std::is_same_v<T, Geometric>) return {{"kind", "geometric"}, {"p", s.success_prob}};
            else return {{"kind", "table"}, {"pmf", s.pmf}};
        },
        spec);
}

DistributionSpec distribution_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "must be an object");
    const auto kind = get_field<std::string>(j, "kind", path);
    DistributionSpec spec;
    if (kind == "zeta_pareto" || kind == "inverse_power") {
        reject_unknown(j, {"kind", "alpha"}, path);
        const auto alpha = get_field<double>(j, "alpha", path);
        spec = kind == "zeta_pareto" ? DistributionSpec{ZetaPareto{alpha}} : DistributionSpec{InversePower{alpha}};
    } else if (kind == "geometric") {
        reject_unknown(j, {"kind", "p"}, path);
        spec = Geometric{get_field<double>(j, "p", path)};
    } else if (kind == "table") {
        reject_unknown(j, {"kind", "pmf"}, path);
        spec = Table{get_field<std::vector<double>>(j, "pmf", path)};
    } else {
        throw ConfigError(path + ".kind", "unknown distribution kind '" + kind + "'");
    }
    check_spec(spec, path);
    return spec;
}

ordered_json to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["dist"] = to_json(cfg.dist);
    if (!cfg.alphas.empty()) j["alphas"] = cfg.alphas;
    j["k"] = cfg.k;
    j["horizon"] = cfg.horizon;
    j["config"] = to_string(cfg.config);
    j["runs"] = cfg.runs;
    j["seed"] = cfg.master_seed;
    j["stride"] = cfg.stride;
    return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg) {
    if (!j.is_object()) throw ConfigError("config", "top level must be an object");
    reject_unknown(j, {"dist", "alphas", "k", "horizon", "config", "runs", "seed", "stride", "jobs"}, "");
    if (j.contains("dist")) cfg.dist = distribution_from_json(j.at("dist"), "dist");
    if (j.contains("alphas")) cfg.alphas = get_field<std::vector<double>>(j, "alphas", "");
    if (j.contains("k")) cfg.k = get_field<int>(j, "k", "");
    if (j.contains("horizon")) cfg.horizon = get_field<std::int64_t>(j, "horizon", "");
    if (j.contains("config")) {
        try {
            cfg.config = leaf_config_from_string(get_field<std::string>(j, "config", ""));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config", e.what());
        }
    }
    if (j.contains("runs")) cfg.runs = get_field<std::int64_t>(j, "runs", "");
    if (j.contains("seed")) cfg.master_seed = get_field<std::uint64_t>(j, "seed", "");
    if (j.contains("stride")) cfg.stride = get_field<std::int64_t>(j, "stride", "");
    if (j.contains("jobs")) cfg.jobs = get_field<int>(j, "jobs", "");
    cfg.validate();
    return cfg;
}

// Parallel driver ---------------------------------------------------------------

void parallel_for(std::int64_t count, int jobs, const std::function<void(std::int64_t)>& body) {
    if (count <= 0) return;
    std::int64_t workers = jobs > 0 ? jobs : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers == 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::int64_t i = next++; i < count && !stop; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::int64_t w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

// Figure runs ---------------------------------------------------------------------

std::vector<VTrace> run_single_trajectory(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto seed = run_seed(cfg.master_seed, 0);
    const auto pool = LeafPool::from_master(cfg.config, seed);
    const auto laws = cfg.laws();
    std::vector<VTrace> out(laws.size());
    parallel_for(static_cast<std::int64_t>(laws.size()), cfg.jobs, [&](std::int64_t i) {
        const auto& law = laws[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = {law, stream_v(DelayDistribution(law), cfg.k, cfg.horizon, pool, seed, cfg.stride)};
    });
    return out;
}

std::vector<MeanVTrace> run_mean_v(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<MeanVTrace> out;
    for (const auto& law : cfg.laws()) {
        const DelayDistribution dist(law);
        const auto samples = static_cast<std::size_t>(cfg.horizon / cfg.stride);
        std::vector<std::vector<double>> per_run(static_cast<std::size_t>(cfg.runs));
        parallel_for(cfg.runs, cfg.jobs, [&](std::int64_t r) {
            const auto seed = run_seed(cfg.master_seed, static_cast<std::uint64_t>(r));
            const auto trace = stream_v(dist, cfg.k, cfg.horizon, LeafPool::from_master(cfg.config, seed), seed, cfg.stride);
            auto& values = per_run[static_cast<std::size_t>(r)];
            values.reserve(trace.size());
            for (const auto& s : trace) values.push_back(s.value);
        });
        MeanVTrace m{law, {}, std::vector<double>(samples, 0.0)};
        for (std::size_t i = 0; i < samples; ++i) m.n.push_back(static_cast<Vertex>(i + 1) * cfg.stride);
        for (const auto& values : per_run)
            for (std::size_t i = 0; i < samples; ++i) m.mean[i] += values[i];
        for (auto& x : m.mean) x /= static_cast<double>(cfg.runs);
        out.push_back(std::move(m));
    }
    return out;
}

// Regime matrix -------------------------------------------------------------------

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass:
            return "PASS";
        case Verdict::Fail:
            return "FAIL";
        case Verdict::Inconclusive:
            return "INCONCLUSIVE";
        case Verdict::NotApplicable:
            return "N/A";
    }
    return "?";
}

std::string to_string(Answer a) {
    switch (a) {
        case Answer::Yes:
            return "yes";
        case Answer::No:
            return "no";
        case Answer::Unknown:
            return "unknown";
        case Answer::Unstated:
            return "unstated";
    }
    return "?";
}

double Fraction::sigma() const {
    if (runs == 0) return 0.0;
    const double p = value();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
}

bool RegimeReport::any_failed() const {
    return dip_detection.verdict == Verdict::Fail ||
           std::any_of(cells.begin(), cells.end(), [](const CellVerdict& c) { return c.verdict == Verdict::Fail; });
}

const CellVerdict& RegimeReport::cell(const std::string& statistic) const {
    for (const auto& c : cells)
        if (c.statistic == statistic) return c;
    throw std::out_of_range("no regime cell named '" + statistic + "'");
}

Answer expected_answer(const std::string& row, RegimeLabel regime, SeriesVerdict squared_sum) {
    const int col = static_cast<int>(regime);  // Light, Moderate, Heavy
    using A = Answer;
    if (row == "L_n -> -inf a.s." || row == "L_n -> -inf in prob.") return std::array{A::No, A::Yes, A::Yes}[col];
    if (row == "Lambda_n -> inf a.s.") return std::array{A::No, A::Yes, A::No}[col];
    if (row == "R_n bounded a.s.") return std::array{A::Yes, A::Yes, A::No}[col];
    if (row == "Lambda_n -> inf in prob.") {
        if (regime != RegimeLabel::Heavy) return std::array{A::No, A::Yes, A::No}[col];
        return squared_sum == SeriesVerdict::Converged ? A::Yes : A::Unstated;
    }
    if (row == "R_n tight") return std::array{A::Yes, A::Yes, A::Unstated}[col];
    if (row == "sum r_n^2 < inf") return regime == RegimeLabel::Heavy ? A::Yes : A::Unstated;
    throw std::out_of_range("unknown regime row '" + row + "'");
}

namespace {

struct RunRecord {
    bool l_increase = false;
    bool lambda_increase = false;
    bool lambda_complete = true;
    bool r_constant = false;
    bool r_past_tenth = false;
    std::array<std::int64_t, 3> abs_l{}, lambda{}, abs_r{};
    std::int64_t dips = 0;
    std::int64_t late_dips = 0;
    std::int64_t max_lambda_at_dip = 0;
};

constexpr std::size_t kLambdaLeafBudget = std::size_t{1} << 24;

RunRecord analyze_run(const DelayDistribution& dist, const ExperimentConfig& cfg, std::int64_t r,
                      const std::array<Vertex, 3>& checkpoints) {
    const auto seed = run_seed(cfg.master_seed, static_cast<std::uint64_t>(r));
    const auto t = simulate(dist, cfg.k, cfg.horizon, LeafPool::from_master(cfg.config, seed), seed);
    const Vertex n_max = cfg.horizon;
    const Vertex half = n_max / 2;
    RunRecord rec;

    const auto curves = extreme_leaf_curves(t);
    std::int64_t max_l = 0, max_r = 0, max_l_half = 0, max_r_half = 0;
    for (Vertex n = 1; n <= n_max; ++n) {
        max_l = std::max(max_l, -curves.leftmost[static_cast<std::size_t>(n - 1)]);
        max_r = std::max(max_r, -curves.rightmost[static_cast<std::size_t>(n - 1)]);
        if (n == half) {
            max_l_half = max_l;
            max_r_half = max_r;
        }
    }
    rec.l_increase = max_l > max_l_half;
    rec.r_constant = max_r == max_r_half;
    rec.r_past_tenth = max_r > n_max / 10;

    try {
        const auto counts = leaf_count_curve(t, kLambdaLeafBudget);
        const auto at_half = *std::max_element(counts.begin(), counts.begin() + half);
        const auto overall = *std::max_element(counts.begin(), counts.end());
        rec.lambda_increase = overall > at_half;
    } catch (const std::length_error&) {
        rec.lambda_complete = false;
        rec.lambda_increase = true;
    }

    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const auto s = reach_stats(t, checkpoints[c]);
        rec.abs_l[c] = -s.l_leaf;
        rec.abs_r[c] = -s.r_leaf;
        rec.lambda[c] = s.lambda;
    }

    for (Vertex n = 1; n <= n_max; ++n) {
        if (t.min_delay(n) < n) continue;
        ++rec.dips;
        if (n >= n_max / 10) ++rec.late_dips;
        rec.max_lambda_at_dip = std::max(rec.max_lambda_at_dip, reach_stats(t, n).lambda);
    }
    return rec;
}

template <class T>
double median_of(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return static_cast<double>(v[(v.size() - 1) / 2]);
}

template <class T>
double quantile90(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(v.size()))) - 1;
    return static_cast<double>(v[idx]);
}

// Answer to "fraction >= threshold", Unknown when one standard error straddles it.
Answer at_least(const Fraction& f, double threshold) {
    if (f.value() - f.sigma() >= threshold) return Answer::Yes;
    if (f.value() + f.sigma() < threshold) return Answer::No;
    return Answer::Unknown;
}

Answer below(const Fraction& f, double threshold) {
    if (f.value() + f.sigma() < threshold) return Answer::Yes;
    if (f.value() - f.sigma() >= threshold) return Answer::No;
    return Answer::Unknown;
}

bool strictly_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

// Tightness proxy: Yes when P(X_n <= m) never rises across the checkpoints and
// falls by more than two standard errors overall, No when the total fall is
// within one.
Answer escapes_in_probability(const std::vector<Fraction>& p) {
    const auto& first = p.front();
    const auto& last = p.back();
    const double drop = first.value() - last.value();
    const double se = std::hypot(first.sigma(), last.sigma());
    bool decreasing = true;
    for (std::size_t i = 1; i < p.size(); ++i) decreasing = decreasing && p[i].value() <= p[i - 1].value();
    if (decreasing && drop > 2.0 * se) return Answer::Yes;
    if (drop <= se) return Answer::No;
    return Answer::Unknown;
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(4);
    s << x;
    return s.str();
}

std::string fmt(const Fraction& f) { return std::to_string(f.hits) + "/" + std::to_string(f.runs); }

template <class T>
std::string fmt_list(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(static_cast<double>(v[i]));
    return s + "]";
}

std::string fmt_list(const std::vector<Fraction>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i].value());
    return s + "]";
}

std::string column_label(RegimeLabel r) {
    switch (r) {
        case RegimeLabel::Light:
            return "E Z < inf";
        case RegimeLabel::Moderate:
            return "E Z = inf, E min < inf";
        case RegimeLabel::Heavy:
            return "E min = inf";
    }
    return "?";
}

Verdict judge(Answer expected, Answer observed) {
    if (expected == Answer::Unstated) return Verdict::NotApplicable;
    if (observed == Answer::Unknown) return Verdict::Inconclusive;
    return expected == observed ? Verdict::Pass : Verdict::Fail;
}

}  // namespace

RegimeReport run_regime_matrix(const ExperimentConfig& cfg, const RegimeThresholds& th) {
    cfg.validate();
    if (!cfg.alphas.empty()) throw ConfigError("alphas", "the regime matrix takes a single law");
    if (cfg.horizon < 100) throw ConfigError("horizon", "the regime matrix needs a horizon of at least 100");
    const DelayDistribution dist(cfg.dist);

    RegimeReport report;
    report.config = cfg;
    report.thresholds = th;
    report.regime = dist.classify(cfg.k);
    report.squared_sum = squared_sum_diagnostic(renewal_sequence(dist, th.renewal_n_max));

    const std::array<Vertex, 3> checkpoints{cfg.horizon / 100, cfg.horizon / 10, cfg.horizon};
    std::vector<RunRecord> records(static_cast<std::size_t>(cfg.runs));
    parallel_for(cfg.runs, cfg.jobs,
                 [&](std::int64_t r) { records[static_cast<std::size_t>(r)] = analyze_run(dist, cfg, r, checkpoints); });

    auto& p = report.proxies;
    p.checkpoints.assign(checkpoints.begin(), checkpoints.end());
    auto count = [&](auto pred) {
        Fraction f{0, cfg.runs};
        for (const auto& rec : records) f.hits += pred(rec) ? 1 : 0;
        return f;
    };
    p.l_running_max_increase = count([](const RunRecord& r) { return r.l_increase; });
    p.lambda_running_max_increase = count([](const RunRecord& r) { return r.lambda_increase; });
    p.r_running_max_constant = count([](const RunRecord& r) { return r.r_constant; });
    p.r_running_max_past_tenth = count([](const RunRecord& r) { return r.r_past_tenth; });
    p.runs_with_dip_quota = count([&](const RunRecord& r) { return r.dips >= th.dip_count_min; });
    p.runs_with_late_dip = count([](const RunRecord& r) { return r.late_dips > 0; });
    p.lambda_curve_complete = std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.lambda_complete; });

    std::int64_t dip_total = 0;
    p.min_dips = records.front().dips;
    for (const auto& r : records) {
        dip_total += r.dips;
        p.min_dips = std::min(p.min_dips, r.dips);
        p.max_lambda_at_dip = std::max(p.max_lambda_at_dip, r.max_lambda_at_dip);
    }
    p.mean_dips = static_cast<double>(dip_total) / static_cast<double>(cfg.runs);

    std::array<std::vector<std::int64_t>, 3> abs_l, lambda, abs_r;
    for (const auto& r : records)
        for (std::size_t c = 0; c < 3; ++c) {
            abs_l[c].push_back(r.abs_l[c]);
            lambda[c].push_back(r.lambda[c]);
            abs_r[c].push_back(r.abs_r[c]);
        }
    for (std::size_t c = 0; c < 3; ++c) {
        p.median_abs_l.push_back(median_of(abs_l[c]));
        p.median_lambda.push_back(median_of(lambda[c]));
        p.q90_abs_r.push_back(quantile90(abs_r[c]));
    }
    p.l_tight_level = p.median_abs_l.front();
    p.lambda_tight_level = p.median_lambda.front();
    for (std::size_t c = 0; c < 3; ++c) {
        Fraction fl{0, cfg.runs}, fa{0, cfg.runs};
        for (std::size_t r = 0; r < records.size(); ++r) {
            fl.hits += static_cast<double>(abs_l[c][r]) <= p.l_tight_level;
            fa.hits += static_cast<double>(lambda[c][r]) <= p.lambda_tight_level;
        }
        p.l_tight.push_back(fl);
        p.lambda_tight.push_back(fa);
    }

    const std::string column = column_label(report.regime.label);
    auto add = [&](const std::string& row, Answer observed, std::string proxy, std::string summary) {
        const auto expected = expected_answer(row, report.regime.label, report.squared_sum.verdict);
        report.cells.push_back({row, column, expected, observed, judge(expected, observed), std::move(proxy), std::move(summary)});
    };

    {
        const auto stable = below(p.l_running_max_increase, th.stable_fraction_max);
        const bool growth = strictly_increasing(p.median_abs_l);
        const Answer obs = stable == Answer::Yes ? Answer::No
                         : (stable == Answer::No && growth) ? Answer::Yes
                                                            : Answer::Unknown;
        add("L_n -> -inf a.s.", obs,
            "bounded iff running max |L_n| grows on [N/2, N] in < " + fmt(th.stable_fraction_max) +
                " of runs; divergent iff it grows in more and median |L_n| rises across checkpoints",
            "running-max increase " + fmt(p.l_running_max_increase) + ", median |L| at checkpoints " + fmt_list(p.median_abs_l));
    }
    {
        const auto recurrent = at_least(p.runs_with_late_dip, th.late_dip_fraction_min);
        const auto stable = below(p.lambda_running_max_increase, th.stable_fraction_max);
        const bool growth = strictly_increasing(p.median_lambda);
        Answer obs = Answer::Unknown;
        if (recurrent == Answer::Yes || stable == Answer::Yes) obs = Answer::No;
        else if (recurrent == Answer::No && stable == Answer::No && growth) obs = Answer::Yes;
        add("Lambda_n -> inf a.s.", obs,
            "no if a dip (min delay >= n) occurs in [N/10, N] in >= " + fmt(th.late_dip_fraction_min) +
                " of runs or running max Lambda_n is stable; yes if neither and median Lambda_n rises",
            "late dips " + fmt(p.runs_with_late_dip) + ", running-max increase " + fmt(p.lambda_running_max_increase) +
                ", median Lambda at checkpoints " + fmt_list(p.median_lambda));
    }
    {
        const auto constant = at_least(p.r_running_max_constant, th.r_constant_fraction_min);
        const auto divergent = at_least(p.r_running_max_past_tenth, th.r_divergent_fraction_min);
        Answer obs = Answer::Unknown;
        if (constant == Answer::Yes && divergent != Answer::Yes) obs = Answer::Yes;
        else if (divergent == Answer::Yes && constant != Answer::Yes) obs = Answer::No;
        add("R_n bounded a.s.", obs,
            "bounded iff running max |R_n| is constant on [N/2, N] in >= " + fmt(th.r_constant_fraction_min) +
                " of runs; unbounded iff it exceeds N/10 in >= " + fmt(th.r_divergent_fraction_min),
            "constant " + fmt(p.r_running_max_constant) + ", past N/10 " + fmt(p.r_running_max_past_tenth));
    }
    add("L_n -> -inf in prob.", escapes_in_probability(p.l_tight),
        "P(|L_n| <= " + fmt(p.l_tight_level) + ") non-increasing across checkpoints, total fall > 2 se",
        "P at checkpoints " + fmt_list(p.l_tight));
    add("Lambda_n -> inf in prob.", escapes_in_probability(p.lambda_tight),
        "P(Lambda_n <= " + fmt(p.lambda_tight_level) + ") non-increasing across checkpoints, total fall > 2 se",
        "P at checkpoints " + fmt_list(p.lambda_tight));
    add("R_n tight",
        p.q90_abs_r.back() <= 2.0 * p.q90_abs_r.front() + 1.0 ? Answer::Yes : Answer::No,
        "90% quantile of |R_N| <= 2 x that of |R_{N/100}| + 1", "q90 |R| at checkpoints " + fmt_list(p.q90_abs_r));
    {
        Answer obs = Answer::Unknown;
        if (report.squared_sum.verdict == SeriesVerdict::Converged) obs = Answer::Yes;
        if (report.squared_sum.verdict == SeriesVerdict::Diverged) obs = Answer::No;
        add("sum r_n^2 < inf", obs,
            "fitted exponent of r_n^2 over the last decade of " + std::to_string(th.renewal_n_max) + " terms < -1 - " +
                fmt(kSquaredSumMargin),
            "exponent " + fmt(report.squared_sum.growth_rate) + ", partial sum " + fmt(report.squared_sum.partial) +
                ", verdict " + to_string(report.squared_sum.verdict));
    }

    {
        // Dips recur forever exactly when E min = inf (independent events with
        // probabilities p_n^k).
        const Answer expected = report.regime.label == RegimeLabel::Heavy ? Answer::Yes : Answer::No;
        Answer obs = Answer::Unknown;
        if (p.max_lambda_at_dip > cfg.k) obs = Answer::No;
        else if (p.runs_with_dip_quota.hits == p.runs_with_dip_quota.runs) obs = Answer::Yes;
        else if (p.runs_with_dip_quota.value() + p.runs_with_dip_quota.sigma() < 0.5) obs = Answer::No;
        report.dip_detection = {"Lambda_n dips", column, expected, obs, judge(expected, obs),
                                "every run has >= " + std::to_string(th.dip_count_min) +
                                    " indices with min delay >= n, each with Lambda_n <= k",
                                "runs meeting quota " + fmt(p.runs_with_dip_quota) + ", fewest dips " +
                                    std::to_string(p.min_dips) + ", mean dips " + fmt(p.mean_dips) +
                                    ", max Lambda at a dip " + std::to_string(p.max_lambda_at_dip)};
    }
    return report;
}

std::vector<RegimeReport> run_regime_matrix(const std::vector<ExperimentConfig>& cfgs, const RegimeThresholds& th) {
    std::vector<RegimeReport> out;
    for (const auto& cfg : cfgs) out.push_back(run_regime_matrix(cfg, th));
    return out;
}

std::vector<RegimeReport> run_k_choice_sweep(const ExperimentConfig& cfg, const std::vector<int>& ks,
                                             const RegimeThresholds& th) {
    std::vector<RegimeReport> out;
    for (int k : ks) {
        auto c = cfg;
        c.k = k;
        out.push_back(run_regime_matrix(c, th));
    }
    return out;
}

namespace {

ordered_json extended(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

ordered_json to_json(const Fraction& f) { return {{"hits", f.hits}, {"runs", f.runs}, {"value", f.value()}, {"sigma", f.sigma()}}; }

ordered_json to_json(const CellVerdict& c) {
    return {{"statistic", c.statistic}, {"column", c.column},     {"expected", to_string(c.expected)},
            {"observed", to_string(c.observed)}, {"verdict", to_string(c.verdict)}, {"proxy", c.proxy},
            {"summary", c.summary}};
}

}  // namespace

ordered_json to_json(const RegimeReport& r) {
    ordered_json j;
    j["schema"] = "surf.regime_report";
    j["version"] = 1;
    j["config"] = to_json(r.config);
    j["regime"] = {{"label", to_string(r.regime.label)}, {"k", r.regime.k}, {"mean_z", extended(r.regime.mean_z)},
                   {"mean_min_k", extended(r.regime.mean_min_k)}, {"aperiodic", r.regime.aperiodic}};
    const auto& t = r.thresholds;
    j["thresholds"] = {{"stable_fraction_max", t.stable_fraction_max},
                       {"r_constant_fraction_min", t.r_constant_fraction_min},
                       {"r_divergent_fraction_min", t.r_divergent_fraction_min},
                       {"dip_count_min", t.dip_count_min},
                       {"late_dip_fraction_min", t.late_dip_fraction_min},
                       {"renewal_n_max", t.renewal_n_max}};
    const auto& p = r.proxies;
    auto fractions = [](const std::vector<Fraction>& v) {
        ordered_json a = ordered_json::array();
        for (const auto& f : v) a.push_back(to_json(f));
        return a;
    };
    j["proxies"] = {{"checkpoints", p.checkpoints},
                    {"l_running_max_increase", to_json(p.l_running_max_increase)},
                    {"lambda_running_max_increase", to_json(p.lambda_running_max_increase)},
                    {"r_running_max_constant", to_json(p.r_running_max_constant)},
                    {"r_running_max_past_tenth", to_json(p.r_running_max_past_tenth)},
                    {"median_abs_l", p.median_abs_l},
                    {"median_lambda", p.median_lambda},
                    {"l_tight_level", p.l_tight_level},
                    {"l_tight", fractions(p.l_tight)},
                    {"lambda_tight_level", p.lambda_tight_level},
                    {"lambda_tight", fractions(p.lambda_tight)},
                    {"q90_abs_r", p.q90_abs_r},
                    {"min_dips", p.min_dips},
                    {"mean_dips", p.mean_dips},
                    {"runs_with_dip_quota", to_json(p.runs_with_dip_quota)},
                    {"runs_with_late_dip", to_json(p.runs_with_late_dip)},
                    {"max_lambda_at_dip", p.max_lambda_at_dip},
                    {"lambda_curve_complete", p.lambda_curve_complete}};
    j["squared_sum"] = {{"verdict", to_string(r.squared_sum.verdict)},
                        {"partial", r.squared_sum.partial},
                        {"growth_rate", r.squared_sum.growth_rate},
                        {"fit_residual", r.squared_sum.fit_residual}};
    ordered_json cells = ordered_json::array();
    for (const auto& c : r.cells) cells.push_back(to_json(c));
    j["cells"] = cells;
    j["dip_detection"] = to_json(r.dip_detection);
    j["failed"] = r.any_failed();
    return j;
}

// Renewal and J_n checks ------------------------------------------------------------

bool MonteCarloCheck::agrees() const { return std::abs(empirical - predicted) <= 4.0 * sigma; }

ordered_json to_json(const MonteCarloCheck& c) {
    return {{"empirical", c.empirical}, {"predicted", c.predicted}, {"sigma", c.sigma},
            {"runs", c.runs},           {"agrees", c.agrees()}};
}

MonteCarloCheck monte_carlo_renewal_check(const DelayDistribution& dist, std::int64_t n_probe, std::int64_t runs,
                                          std::uint64_t master_seed, int jobs) {
    if (n_probe < 1 || n_probe > 2000) throw std::invalid_argument("monte_carlo_renewal_check: n_probe must lie in [1, 2000]");
    if (runs < 1) throw std::invalid_argument("monte_carlo_renewal_check: runs must be positive");
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(runs), 0);
    parallel_for(runs, jobs, [&](std::int64_t r) {
        UniformStream s(derive_seed(run_seed(master_seed, static_cast<std::uint64_t>(r)), kDelayStream));
        Vertex m = n_probe;
        while (m > 0) m -= dist.sample(s);
        hit[static_cast<std::size_t>(r)] = m == 0;
    });
    MonteCarloCheck c;
    c.runs = runs;
    c.predicted = renewal_sequence(dist, n_probe)[n_probe];
    const auto hits = std::count(hit.begin(), hit.end(), std::uint8_t{1});
    c.empirical = static_cast<double>(hits) / static_cast<double>(runs);
    c.sigma = std::sqrt(c.predicted * (1.0 - c.predicted) / static_cast<double>(runs));
    return c;
}

double expected_j(const DelayDistribution& dist, int k, std::int64_t n) {
    if (k < 1) throw std::invalid_argument("expected_j: k must be positive");
    if (n < 1) throw std::invalid_argument("expected_j: n must be positive");
    const auto v = renewal_sequence(dist.min_of(k), n);
    detail::CompensatedSum sum;
    for (std::int64_t m = 1; m <= n; ++m) {
        const double p = dist.tail(m);
        const double p_max = k == 2 ? dist.max_pair_tail(m) : -std::expm1(k * std::log1p(-p));
        sum.add(v[n - m] * p_max);
    }
    return sum.value();
}

MonteCarloCheck j_expectation_check(const ExperimentConfig& cfg) {
    cfg.validate();
    const DelayDistribution dist(cfg.dist);
    std::vector<std::int64_t> j(static_cast<std::size_t>(cfg.runs));
    parallel_for(cfg.runs, cfg.jobs, [&](std::int64_t r) {
        const auto seed = run_seed(cfg.master_seed, static_cast<std::uint64_t>(r));
        const auto t = simulate(dist, cfg.k, cfg.horizon, LeafPool::from_master(cfg.config, seed), seed);
        j[static_cast<std::size_t>(r)] = j_count(t, cfg.horizon);
    });
    double mean = 0.0;
    for (auto x : j) mean += static_cast<double>(x);
    mean /= static_cast<double>(cfg.runs);
    double ss = 0.0;
    for (auto x : j) ss += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
    MonteCarloCheck c;
    c.runs = cfg.runs;
    c.empirical = mean;
    c.sigma = cfg.runs > 1 ? std::sqrt(ss / static_cast<double>(cfg.runs - 1) / static_cast<double>(cfg.runs)) : 0.0;
    c.predicted = expected_j(dist, cfg.k, cfg.horizon);
    return c;
}

// CSV -------------------------------------------------------------------------------

std::string format_double(double x) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::string trajectory_csv(const Trajectory& t, bool with_delays) {
    if (with_delays) t.require_delays();
    std::string out = "n,C_n,V_n";
    if (with_delays)
        for (int j = 1; j <= t.k(); ++j) out += ",Z" + std::to_string(j);
    out += '\n';
    for (Vertex n = 1; n <= t.horizon(); ++n) {
        out += std::to_string(n) + ',' + std::to_string(t.color(n)) + ',' + format_double(t.value(n));
        if (with_delays)
            for (int j = 0; j < t.k(); ++j) out += ',' + std::to_string(t.delay(n, j));
        out += '\n';
    }
    return out;
}

std::string renewal_csv(const RenewalSequence& seq) {
    std::string out = "n,r_n,partial_square_sum\n";
    for (std::int64_t n = 0; n <= seq.n_max(); ++n)
        out += std::to_string(n) + ',' + format_double(seq[n]) + ',' +
               format_double(seq.partial_square_sums[static_cast<std::size_t>(n)]) + '\n';
    return out;
}

std::string v_trace_csv(const VTrace& trace) {
    std::string out = "n,V_n,C_n\n";
    for (const auto& s : trace.samples)
        out += std::to_string(s.n) + ',' + format_double(s.value) + ',' + std::to_string(s.color) + '\n';
    return out;
}

std::string mean_v_csv(const MeanVTrace& trace) {
    std::string out = "n,mean_V_n\n";
    for (std::size_t i = 0; i < trace.n.size(); ++i) out += std::to_string(trace.n[i]) + ',' + format_double(trace.mean[i]) + '\n';
    return out;
}

}  // namespace surf

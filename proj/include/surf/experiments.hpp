#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "surf/delay_distribution.hpp"
#include "surf/forest.hpp"
#include "surf/process.hpp"
#include "surf/renewal.hpp"

namespace surf {

/// Invalid configuration. field() names the offending key using dotted paths
/// such as "dist.alpha".
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    DistributionSpec dist = ZetaPareto{0.6};
    /// When non-empty, one series per value with the Pareto index of `dist`
    /// replaced (figure runs).
    std::vector<double> alphas;
    int k = 2;
    std::int64_t horizon = 10'000;
    LeafConfig config = LeafConfig::IidUniform;
    std::int64_t runs = 200;
    std::uint64_t master_seed = 0;
    std::int64_t stride = 100;
    /// Worker threads; 0 means hardware concurrency. Results never depend on it.
    int jobs = 0;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    /// Laws covered by this config: `dist`, or one per entry of `alphas`.
    std::vector<DistributionSpec> laws() const;
};

nlohmann::ordered_json to_json(const DistributionSpec& spec);
/// `path` prefixes field names in errors (e.g. "dist").
DistributionSpec distribution_from_json(const nlohmann::json& j, const std::string& path = "dist");
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0: hardware
/// concurrency). The first exception thrown by any task is rethrown.
void parallel_for(std::int64_t count, int jobs, const std::function<void(std::int64_t)>& body);

// Figure runs -----------------------------------------------------------------

struct VTrace {
    DistributionSpec law;
    std::vector<VSample> samples;
};

/// One run per law with seed run_seed(master, 0), sampled every `stride`.
std::vector<VTrace> run_single_trajectory(const ExperimentConfig& cfg);

struct MeanVTrace {
    DistributionSpec law;
    std::vector<Vertex> n;
    std::vector<double> mean;
};

/// Mean of V_n over `runs` runs per law. Run r uses run_seed(master, r); sums
/// are accumulated in run order, so results do not depend on `jobs`.
std::vector<MeanVTrace> run_mean_v(const ExperimentConfig& cfg);

// Regime matrix -----------------------------------------------------------------

enum class Verdict { Pass, Fail, Inconclusive, NotApplicable };
std::string to_string(Verdict v);

/// Outcome of a proxy that answers a yes/no question.
enum class Answer { Yes, No, Unknown, Unstated };
std::string to_string(Answer a);

struct CellVerdict {
    std::string statistic;  ///< table row, e.g. "L_n -> -inf a.s."
    std::string column;     ///< regime column label
    Answer expected;
    Answer observed;
    Verdict verdict;
    std::string proxy;      ///< the finite-horizon statistic used
    std::string summary;    ///< observed numbers
};

/// Fraction estimate with its binomial standard error.
struct Fraction {
    std::int64_t hits = 0;
    std::int64_t runs = 0;
    double value() const { return runs ? double(hits) / double(runs) : 0.0; }
    double sigma() const;
};

/// Threshold proxies. Defaults are the documented desk-scale choices.
struct RegimeThresholds {
    double stable_fraction_max = 0.05;     ///< running-max increase rate for "bounded"
    double r_constant_fraction_min = 0.90; ///< runs with constant running-max |R|
    double r_divergent_fraction_min = 0.90;///< runs with max |R| past horizon / 10
    std::int64_t dip_count_min = 10;       ///< dips per run for dip detection
    double late_dip_fraction_min = 0.90;   ///< runs with a dip in [N/10, N]
    std::int64_t renewal_n_max = 100'000;  ///< length of r for the sum of squares
};

struct RegimeProxies {
    std::vector<Vertex> checkpoints;       ///< N/100, N/10, N
    Fraction l_running_max_increase;       ///< over [N/2, N]
    Fraction lambda_running_max_increase;  ///< over [N/2, N]
    Fraction r_running_max_constant;       ///< over [N/2, N]
    Fraction r_running_max_past_tenth;     ///< max_{n <= N} |R_n| > N / 10
    std::vector<double> median_abs_l;      ///< at checkpoints
    std::vector<double> median_lambda;
    std::vector<Fraction> l_tight;         ///< P(|L_n| <= m_L) at checkpoints
    std::vector<Fraction> lambda_tight;    ///< P(Lambda_n <= m_Lambda) at checkpoints
    double l_tight_level = 0;
    double lambda_tight_level = 0;
    std::vector<double> q90_abs_r;         ///< at checkpoints
    std::int64_t min_dips = 0;             ///< fewest dips over runs
    double mean_dips = 0;
    Fraction runs_with_dip_quota;          ///< runs with >= dip_count_min dips
    Fraction runs_with_late_dip;           ///< runs with a dip in [N/10, N]
    std::int64_t max_lambda_at_dip = 0;    ///< over every dip of every run
    bool lambda_curve_complete = true;     ///< false if a run exceeded the leaf budget
};

struct RegimeReport {
    ExperimentConfig config;
    Regime regime;
    RegimeThresholds thresholds;
    RegimeProxies proxies;
    SquaredSumReport squared_sum;
    std::vector<CellVerdict> cells;
    /// Dip detection: every run has >= dip_count_min dips and Lambda <= k at each.
    CellVerdict dip_detection;

    bool any_failed() const;
    const CellVerdict& cell(const std::string& statistic) const;
};

nlohmann::ordered_json to_json(const RegimeReport& report);

/// Rows of the summary table, in table order.
inline const std::vector<std::string>& regime_rows() {
    static const std::vector<std::string> rows{
        "L_n -> -inf a.s.", "Lambda_n -> inf a.s.", "R_n bounded a.s.",
        "L_n -> -inf in prob.", "Lambda_n -> inf in prob.", "R_n tight", "sum r_n^2 < inf"};
    return rows;
}

/// Expected table entry for (row, regime); Unstated where the table is blank
/// and for the sum-of-squares row outside the heavy column.
Answer expected_answer(const std::string& row, RegimeLabel regime, SeriesVerdict squared_sum);

RegimeReport run_regime_matrix(const ExperimentConfig& cfg, const RegimeThresholds& thresholds = {});
std::vector<RegimeReport> run_regime_matrix(const std::vector<ExperimentConfig>& cfgs,
                                            const RegimeThresholds& thresholds = {});

/// Same matrix for each k, with the regime recomputed per k.
std::vector<RegimeReport> run_k_choice_sweep(const ExperimentConfig& cfg, const std::vector<int>& ks,
                                             const RegimeThresholds& thresholds = {});

// Renewal and J_n checks --------------------------------------------------------

struct MonteCarloCheck {
    double empirical = 0;   ///< sample frequency or mean
    double predicted = 0;   ///< recursion value
    double sigma = 0;       ///< standard error of `empirical`
    std::int64_t runs = 0;
    bool agrees() const;    ///< |empirical - predicted| <= 4 sigma
};

nlohmann::ordered_json to_json(const MonteCarloCheck& check);

/// Frequency of 0 in T^Z_{n_probe} over `runs` independent Z-chains against
/// r_{n_probe}. Requires 1 <= n_probe <= 2000.
MonteCarloCheck monte_carlo_renewal_check(const DelayDistribution& dist, std::int64_t n_probe, std::int64_t runs,
                                          std::uint64_t master_seed, int jobs = 0);

/// sum_{m=1}^n v_{n-m} P(max of k delays >= m), v the renewal sequence of the
/// minimum law.
double expected_j(const DelayDistribution& dist, int k, std::int64_t n);

/// Sample mean of J_N over cfg.runs trajectories of cfg.dist against expected_j.
MonteCarloCheck j_expectation_check(const ExperimentConfig& cfg);

// CSV output --------------------------------------------------------------------

/// Shortest round-trip decimal form.
std::string format_double(double x);

std::string trajectory_csv(const Trajectory& t, bool with_delays);
std::string renewal_csv(const RenewalSequence& seq);
std::string v_trace_csv(const VTrace& trace);
std::string mean_v_csv(const MeanVTrace& trace);

}  // namespace surf

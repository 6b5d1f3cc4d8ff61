#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surf/delay_distribution.hpp"

namespace surf {

/// Vertex index: positive for time steps, nonpositive for leaves (topics).
using Vertex = std::int64_t;

enum class LeafConfig {
    IncreasingBest0,    ///< (i)   U_0 < U_-1 < U_-2 < ...
    DecreasingOldBest,  ///< (ii)  U_0 > U_-1 > U_-2 > ...
    IidUniform,         ///< (iii) i.i.d. uniform on [0, 1)
};

std::string to_string(LeafConfig c);
LeafConfig leaf_config_from_string(const std::string& s);

/// Preference values U_i of the leaves i <= 0. Values are a pure function of
/// (config, seed, i); nothing is stored.
class LeafPool {
public:
    LeafPool(LeafConfig config, std::uint64_t seed) : config_(config), seed_(seed) {}

    /// Pool whose seed is split off a run's master seed.
    static LeafPool from_master(LeafConfig config, std::uint64_t master_seed);

    /// (i): |i| / (|i| + 1); (ii): 1 / (|i| + 1); (iii): counter-based uniform.
    /// Throws std::invalid_argument for i > 0.
    double value(Vertex i) const;

    /// Strict total order on leaves: true iff leaf a is preferred to leaf b.
    /// Agrees with value(a) < value(b) whenever the two values differ; for
    /// (i) and (ii) it compares indices directly, so it stays exact where the
    /// doubles would round together. Equal (iii) values fall back to index.
    bool prefers(Vertex a, double value_a, Vertex b, double value_b) const {
        switch (config_) {
            case LeafConfig::IncreasingBest0:
                return a > b;
            case LeafConfig::DecreasingOldBest:
                return a < b;
            case LeafConfig::IidUniform:
                return value_a < value_b || (value_a == value_b && a > b);
        }
        return false;
    }

    bool prefers(Vertex a, Vertex b) const { return prefers(a, value(a), b, value(b)); }

    LeafConfig config() const { return config_; }
    std::uint64_t seed() const { return seed_; }

private:
    LeafConfig config_;
    std::uint64_t seed_;
};

/// One simulated run of the k-choice coloring process over steps 1..N.
class Trajectory {
public:
    Trajectory(DelayDistribution dist, int k, std::int64_t horizon, LeafPool pool, std::uint64_t seed,
               bool retain_delays);

    int k() const { return k_; }
    std::int64_t horizon() const { return horizon_; }
    std::uint64_t seed() const { return seed_; }
    const LeafPool& pool() const { return pool_; }
    const DelayDistribution& distribution() const { return dist_; }
    bool has_delays() const { return !delays_.empty(); }

    /// Color C_n; for n <= 0 this is n itself.
    Vertex color(Vertex n) const { return n <= 0 ? n : colors_[static_cast<std::size_t>(n - 1)]; }
    /// Preference value V_n; for n <= 0 this is U_n.
    double value(Vertex n) const { return n <= 0 ? pool_.value(n) : values_[static_cast<std::size_t>(n - 1)]; }

    /// Z_n^(j), 0-based choice index. Throws std::logic_error when delays
    /// were not retained.
    std::int64_t delay(Vertex n, int j) const;
    Vertex parent(Vertex n, int j) const { return n - delay(n, j); }
    std::span<const std::int64_t> delays_at(Vertex n) const;
    std::int64_t min_delay(Vertex n) const;
    std::int64_t max_delay(Vertex n) const;

    std::span<const Vertex> colors() const { return colors_; }
    std::span<const double> values() const { return values_; }
    std::span<const std::int64_t> delay_matrix() const { return delays_; }

    /// Throws std::logic_error unless delays were retained.
    void require_delays() const;

private:
    friend Trajectory simulate(const DelayDistribution&, int, std::int64_t, const LeafPool&, std::uint64_t, bool);
    friend Trajectory trajectory_from_delays(const DelayDistribution&, int, std::vector<std::int64_t>, const LeafPool&,
                                             std::uint64_t);

    DelayDistribution dist_;
    int k_;
    std::int64_t horizon_;
    LeafPool pool_;
    std::uint64_t seed_;
    std::vector<Vertex> colors_;
    std::vector<double> values_;
    std::vector<std::int64_t> delays_;  // row-major N x k
};

/// Runs the coloring recursion for n = 1..horizon. At each step k delays are
/// drawn from the delay sub-stream of `seed`; the candidate with the
/// preferred leaf wins, ties to the lowest choice index.
/// Throws std::invalid_argument for k < 2 or horizon < 1.
Trajectory simulate(const DelayDistribution& dist, int k, std::int64_t horizon, const LeafPool& pool,
                    std::uint64_t seed, bool retain_delays = true);

/// Replays the recursion on a given N x k delay matrix (row-major).
Trajectory trajectory_from_delays(const DelayDistribution& dist, int k, std::vector<std::int64_t> delays,
                                  const LeafPool& pool, std::uint64_t seed = 0);

struct VSample {
    Vertex n;
    double value;
    Vertex color;
};

/// (n, V_n, C_n) at n = stride, 2 stride, ... <= horizon. Delays are not
/// retained.
std::vector<VSample> stream_v(const DelayDistribution& dist, int k, std::int64_t horizon, const LeafPool& pool,
                              std::uint64_t seed, std::int64_t stride);

}  // namespace surf

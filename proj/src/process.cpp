#include "surf/process.hpp"

#include <algorithm>
#include <stdexcept>

#include "surf/rng.hpp"

namespace surf {

std::string to_string(LeafConfig c) {
    switch (c) {
        case LeafConfig::IncreasingBest0:
            return "increasing";
        case LeafConfig::DecreasingOldBest:
            return "decreasing";
        case LeafConfig::IidUniform:
            return "iid";
    }
    return "?";
}

LeafConfig leaf_config_from_string(const std::string& s) {
    if (s == "increasing" || s == "i" || s == "1") return LeafConfig::IncreasingBest0;
    if (s == "decreasing" || s == "ii" || s == "2") return LeafConfig::DecreasingOldBest;
    if (s == "iid" || s == "iii" || s == "3") return LeafConfig::IidUniform;
    throw std::invalid_argument("unknown leaf configuration '" + s + "' (expected increasing, decreasing or iid)");
}

LeafPool LeafPool::from_master(LeafConfig config, std::uint64_t master_seed) {
    return LeafPool(config, derive_seed(master_seed, kLeafStream));
}

double LeafPool::value(Vertex i) const {
    if (i > 0) throw std::invalid_argument("leaf_value: leaf index must be <= 0");
    const auto depth = static_cast<double>(-i);
    switch (config_) {
        case LeafConfig::IncreasingBest0:
            return depth / (depth + 1.0);
        case LeafConfig::DecreasingOldBest:
            return 1.0 / (depth + 1.0);
        case LeafConfig::IidUniform:
            return bits_to_unit_closed_open(mix64(seed_ + static_cast<std::uint64_t>(-i) * 0x9e3779b97f4a7c15ULL));
    }
    return 0.0;
}

Trajectory::Trajectory(DelayDistribution dist, int k, std::int64_t horizon, LeafPool pool, std::uint64_t seed,
                       bool retain_delays)
    : dist_(std::move(dist)), k_(k), horizon_(horizon), pool_(pool), seed_(seed) {
    colors_.resize(static_cast<std::size_t>(horizon));
    values_.resize(static_cast<std::size_t>(horizon));
    if (retain_delays) delays_.resize(static_cast<std::size_t>(horizon) * static_cast<std::size_t>(k));
}

void Trajectory::require_delays() const {
    if (delays_.empty()) throw std::logic_error("trajectory was simulated without retaining delays");
}

std::int64_t Trajectory::delay(Vertex n, int j) const {
    require_delays();
    return delays_[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(j)];
}

std::span<const std::int64_t> Trajectory::delays_at(Vertex n) const {
    require_delays();
    return std::span<const std::int64_t>(delays_).subspan(static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(k_),
                                                          static_cast<std::size_t>(k_));
}

std::int64_t Trajectory::min_delay(Vertex n) const {
    const auto d = delays_at(n);
    return *std::min_element(d.begin(), d.end());
}

std::int64_t Trajectory::max_delay(Vertex n) const {
    const auto d = delays_at(n);
    return *std::max_element(d.begin(), d.end());
}

namespace {

// Shared recursion. next_delay(n, j) supplies Z_n^(j).
template <class DelaySource>
void run_recursion(Trajectory& t, std::vector<Vertex>& colors, std::vector<double>& values,
                   std::vector<std::int64_t>& delays, DelaySource&& next_delay) {
    const int k = t.k();
    const auto& pool = t.pool();
    const bool keep = !delays.empty();
    for (Vertex n = 1; n <= t.horizon(); ++n) {
        Vertex best_color = 0;
        double best_value = 0.0;
        for (int j = 0; j < k; ++j) {
            const std::int64_t d = next_delay(n, j);
            if (keep) delays[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)] = d;
            const Vertex m = n - d;
            Vertex c;
            double v;
            if (m >= 1) {
                c = colors[static_cast<std::size_t>(m - 1)];
                v = values[static_cast<std::size_t>(m - 1)];
            } else {
                c = m;
                v = pool.value(m);
            }
            if (j == 0 || pool.prefers(c, v, best_color, best_value)) {
                best_color = c;
                best_value = v;
            }
        }
        colors[static_cast<std::size_t>(n - 1)] = best_color;
        values[static_cast<std::size_t>(n - 1)] = best_value;
    }
}

}  // namespace

Trajectory simulate(const DelayDistribution& dist, int k, std::int64_t horizon, const LeafPool& pool,
                    std::uint64_t seed, bool retain_delays) {
    if (k < 2) throw std::invalid_argument("simulate: k must be >= 2");
    if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
    Trajectory t(dist, k, horizon, pool, seed, retain_delays);
    UniformStream stream(derive_seed(seed, kDelayStream));
    run_recursion(t, t.colors_, t.values_, t.delays_, [&](Vertex, int) { return dist.sample(stream); });
    return t;
}

Trajectory trajectory_from_delays(const DelayDistribution& dist, int k, std::vector<std::int64_t> delays,
                                  const LeafPool& pool, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("trajectory_from_delays: k must be >= 2");
    if (delays.empty() || delays.size() % static_cast<std::size_t>(k) != 0)
        throw std::invalid_argument("trajectory_from_delays: delay matrix must be a nonempty N x k array");
    if (std::any_of(delays.begin(), delays.end(), [](std::int64_t d) { return d < 1; }))
        throw std::invalid_argument("trajectory_from_delays: delays must be positive");
    const auto horizon = static_cast<std::int64_t>(delays.size() / static_cast<std::size_t>(k));
    Trajectory t(dist, k, horizon, pool, seed, true);
    t.delays_ = std::move(delays);
    std::vector<std::int64_t> scratch;  // delays already in place
    run_recursion(t, t.colors_, t.values_, scratch, [&](Vertex n, int j) {
        return t.delays_[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)];
    });
    return t;
}

std::vector<VSample> stream_v(const DelayDistribution& dist, int k, std::int64_t horizon, const LeafPool& pool,
                              std::uint64_t seed, std::int64_t stride) {
    if (stride < 1) throw std::invalid_argument("stream_v: stride must be >= 1");
    const auto t = simulate(dist, k, horizon, pool, seed, false);
    std::vector<VSample> out;
    out.reserve(static_cast<std::size_t>(horizon / stride));
    for (Vertex n = stride; n <= horizon; n += stride) out.push_back({n, t.value(n), t.color(n)});
    return out;
}

}  // namespace surf

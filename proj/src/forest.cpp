#include "surf/forest.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace surf {

namespace {

void check_vertex(const Trajectory& traj, Vertex n) {
    traj.require_delays();
    if (n < 1 || n > traj.horizon()) throw std::out_of_range("vertex outside [1, horizon]");
}

// Marks T_n ∩ [1, n] in `visited` and appends every leaf edge target (with
// repeats) to `leaves`. Returns the number of internal vertices.
std::int64_t sweep(const Trajectory& traj, Vertex n, std::vector<std::uint8_t>& visited, std::vector<Vertex>& leaves) {
    visited.assign(static_cast<std::size_t>(n + 1), 0);
    visited[static_cast<std::size_t>(n)] = 1;
    Vertex lowest = n;
    std::int64_t internal = 0;
    const int k = traj.k();
    for (Vertex m = n; m >= lowest; --m) {
        if (!visited[static_cast<std::size_t>(m)]) continue;
        ++internal;
        for (int j = 0; j < k; ++j) {
            const Vertex p = traj.parent(m, j);
            if (p >= 1) {
                visited[static_cast<std::size_t>(p)] = 1;
                lowest = std::min(lowest, p);
            } else {
                leaves.push_back(p);
            }
        }
    }
    return internal;
}

}  // namespace

ReachStats reach_stats(const Trajectory& traj, Vertex n, bool collect_leaves) {
    check_vertex(traj, n);
    std::vector<std::uint8_t> visited;
    std::vector<Vertex> leaves;
    const std::int64_t internal = sweep(traj, n, visited, leaves);
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

    ReachStats s;
    s.n = n;
    s.lambda = static_cast<std::int64_t>(leaves.size());
    s.l_leaf = leaves.front();
    s.r_leaf = leaves.back();
    s.reach_size = internal + s.lambda;
    if (collect_leaves) {
        if (leaves.size() > kLeafListCap) {
            leaves.resize(kLeafListCap);
            s.leaves_truncated = true;
        }
        s.leaves = std::move(leaves);
    }
    return s;
}

ChainStats chain(const Trajectory& traj, Vertex n, ChainKind kind) {
    check_vertex(traj, n);
    if (kind.tag == ChainKind::Tag::ZChain && (kind.choice < 0 || kind.choice >= traj.k()))
        throw std::out_of_range("chain: choice index outside [0, k)");
    ChainStats c{kind, {}, 0};
    Vertex m = n;
    while (m >= 1) {
        c.vertices.push_back(m);
        m -= kind.tag == ChainKind::Tag::ZChain ? traj.delay(m, kind.choice) : traj.min_delay(m);
    }
    c.vertices.push_back(m);
    c.terminal_leaf = m;
    return c;
}

std::int64_t j_count(const Trajectory& traj, Vertex n) {
    check_vertex(traj, n);
    std::int64_t count = 0;
    for (Vertex m = n; m >= 1; m -= traj.min_delay(m))
        if (traj.max_delay(m) >= m) ++count;
    return count;
}

LongestEdgeLeafStats longest_edge_leaf_stats(const Trajectory& traj, Vertex n) {
    check_vertex(traj, n);
    LongestEdgeLeafStats s;
    for (Vertex m = n; m >= 1; m -= traj.min_delay(m)) {
        const auto d = traj.max_delay(m);
        if (d >= m) ++s.chain_multiplicity[m - d];
    }
    for (Vertex m = 1; m <= n; ++m) {
        const auto d = traj.max_delay(m);
        if (d >= m) ++s.all_multiplicity[m - d];
    }
    s.distinct_leaves = static_cast<std::int64_t>(s.chain_multiplicity.size());
    return s;
}

std::pair<Vertex, double> brute_force_cv(const Trajectory& traj, Vertex n) {
    const auto stats = reach_stats(traj, n, true);
    if (stats.leaves_truncated) throw std::length_error("brute_force_cv: leaf set exceeds the list cap");
    const auto& pool = traj.pool();
    Vertex best = stats.leaves.front();
    double best_value = pool.value(best);
    for (const Vertex leaf : stats.leaves) {
        const double v = pool.value(leaf);
        if (pool.prefers(leaf, v, best, best_value)) {
            best = leaf;
            best_value = v;
        }
    }
    return {best, best_value};
}

std::optional<Vertex> coalescence_estimate(const Trajectory& traj, std::optional<Vertex> max_candidate) {
    traj.require_delays();
    const Vertex horizon = traj.horizon();
    const Vertex last = std::min(horizon, max_candidate.value_or(std::max<Vertex>(1, horizon / 2)));
    // v lies on every min-chain from (v, horizon] iff no min-edge from that
    // range jumps below v; by induction each such n then descends to v.
    std::vector<Vertex> suffix_min(static_cast<std::size_t>(horizon + 1), std::numeric_limits<Vertex>::max());
    for (Vertex n = horizon; n >= 2; --n)
        suffix_min[static_cast<std::size_t>(n - 1)] = std::min(suffix_min[static_cast<std::size_t>(n)], n - traj.min_delay(n));
    for (Vertex v = 1; v <= last; ++v)
        if (suffix_min[static_cast<std::size_t>(v)] >= v) return v;
    return std::nullopt;
}

ExtremeLeafCurves extreme_leaf_curves(const Trajectory& traj) {
    traj.require_delays();
    const auto horizon = static_cast<std::size_t>(traj.horizon());
    ExtremeLeafCurves c;
    c.leftmost.resize(horizon);
    c.rightmost.resize(horizon);
    for (Vertex n = 1; n <= traj.horizon(); ++n) {
        Vertex lo = std::numeric_limits<Vertex>::max();
        Vertex hi = std::numeric_limits<Vertex>::min();
        for (int j = 0; j < traj.k(); ++j) {
            const Vertex p = traj.parent(n, j);
            const Vertex pl = p >= 1 ? c.leftmost[static_cast<std::size_t>(p - 1)] : p;
            const Vertex pr = p >= 1 ? c.rightmost[static_cast<std::size_t>(p - 1)] : p;
            lo = std::min(lo, pl);
            hi = std::max(hi, pr);
        }
        c.leftmost[static_cast<std::size_t>(n - 1)] = lo;
        c.rightmost[static_cast<std::size_t>(n - 1)] = hi;
    }
    return c;
}

std::vector<std::int64_t> leaf_count_curve(const Trajectory& traj, std::size_t max_stored_leaves) {
    traj.require_delays();
    const auto horizon = static_cast<std::size_t>(traj.horizon());
    std::vector<std::vector<Vertex>> sets(horizon);
    std::vector<std::int64_t> counts(horizon);
    std::vector<Vertex> merged, scratch;
    std::size_t stored = 0;
    for (Vertex n = 1; n <= traj.horizon(); ++n) {
        merged.clear();
        for (int j = 0; j < traj.k(); ++j) {
            const Vertex p = traj.parent(n, j);
            scratch.clear();
            if (p >= 1) {
                const auto& s = sets[static_cast<std::size_t>(p - 1)];
                std::set_union(merged.begin(), merged.end(), s.begin(), s.end(), std::back_inserter(scratch));
            } else {
                const Vertex leaf[1] = {p};
                std::set_union(merged.begin(), merged.end(), leaf, leaf + 1, std::back_inserter(scratch));
            }
            merged.swap(scratch);
        }
        stored += merged.size();
        if (stored > max_stored_leaves) throw std::length_error("leaf_count_curve: stored leaf sets exceed the budget");
        counts[static_cast<std::size_t>(n - 1)] = static_cast<std::int64_t>(merged.size());
        sets[static_cast<std::size_t>(n - 1)] = merged;
    }
    return counts;
}

Subgraph build_subgraph(const Trajectory& traj, Vertex n) {
    check_vertex(traj, n);
    std::vector<std::uint8_t> visited;
    std::vector<Vertex> leaves;
    sweep(traj, n, visited, leaves);
    std::sort(leaves.begin(), leaves.end(), std::greater<>());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

    Subgraph g;
    g.root = n;
    for (Vertex m = n; m >= 1; --m) {
        if (!visited[static_cast<std::size_t>(m)]) continue;
        g.vertices.push_back({m, VertexRole::Internal});
        for (int j = 0; j < traj.k(); ++j) g.edges.push_back({m, traj.parent(m, j), j});
    }
    for (const Vertex leaf : leaves) g.vertices.push_back({leaf, VertexRole::Leaf});
    return g;
}

std::string export_subgraph(const Trajectory& traj, Vertex n, GraphFormat format) {
    const auto g = build_subgraph(traj, n);
    return format == GraphFormat::Dot ? to_dot(g) : to_json(g);
}

}  // namespace surf

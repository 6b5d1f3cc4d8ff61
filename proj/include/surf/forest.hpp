#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surf/process.hpp"

namespace surf {

/// Cap on the leaf list carried by ReachStats. Counts stay exact past it.
inline constexpr std::size_t kLeafListCap = 1'000'000;

/// Structure of T_n, the set of vertices reachable from n.
struct ReachStats {
    Vertex n = 0;
    std::int64_t lambda = 0;       ///< number of leaves reached
    Vertex r_leaf = 0;             ///< rightmost (largest) leaf
    Vertex l_leaf = 0;             ///< leftmost (smallest) leaf
    std::int64_t reach_size = 0;   ///< |T_n|, leaves included
    std::vector<Vertex> leaves;    ///< ascending; filled on request
    bool leaves_truncated = false;
};

/// Backward sweep over a visited bitmap in descending index order.
/// Throws std::logic_error without retained delays and std::out_of_range
/// for n outside [1, horizon].
ReachStats reach_stats(const Trajectory& traj, Vertex n, bool collect_leaves = false);

/// Chain selector: follow one choice's delays, or the per-step minimum.
struct ChainKind {
    enum class Tag { ZChain, MinChain } tag = Tag::MinChain;
    int choice = 0;

    static ChainKind z_chain(int j) { return {Tag::ZChain, j}; }
    static ChainKind min_chain() { return {Tag::MinChain, 0}; }
};

struct ChainStats {
    ChainKind kind;
    std::vector<Vertex> vertices;  ///< n, ..., terminal leaf (descending)
    Vertex terminal_leaf = 0;
};

ChainStats chain(const Trajectory& traj, Vertex n, ChainKind kind);

/// Number of min-chain vertices m >= 1 of n whose longest delay reaches a
/// leaf (max_j Z_m^(j) >= m).
std::int64_t j_count(const Trajectory& traj, Vertex n);

struct LongestEdgeLeafStats {
    std::int64_t distinct_leaves = 0;                 ///< |leaf set hit from the min-chain|
    std::map<Vertex, std::int64_t> chain_multiplicity; ///< restricted to min-chain vertices
    std::map<Vertex, std::int64_t> all_multiplicity;   ///< D_{n,leaf}, over every m in 1..n
};

LongestEdgeLeafStats longest_edge_leaf_stats(const Trajectory& traj, Vertex n);

/// (argmin, min) of the preference over the leaves reached from n, computed
/// from the reach set alone.
std::pair<Vertex, double> brute_force_cv(const Trajectory& traj, Vertex n);

/// Smallest vertex v in [1, max_candidate] lying on the min-chain of every
/// n in [v, horizon]. Absent when no such vertex exists (right-censored).
/// max_candidate defaults to horizon / 2 so every estimate is backed by at
/// least half the horizon.
std::optional<Vertex> coalescence_estimate(const Trajectory& traj, std::optional<Vertex> max_candidate = {});

/// L_n and R_n for every n in 1..horizon from the forward recursions
/// L_n = min_j L(parent_j), R_n = max_j R(parent_j) (a leaf is its own L, R).
struct ExtremeLeafCurves {
    std::vector<Vertex> leftmost;
    std::vector<Vertex> rightmost;
};

ExtremeLeafCurves extreme_leaf_curves(const Trajectory& traj);

/// Lambda_n for every n in 1..horizon by forward merging of leaf sets. Memory
/// grows with the sum of Lambda_n; throws std::length_error past
/// `max_stored_leaves`.
std::vector<std::int64_t> leaf_count_curve(const Trajectory& traj, std::size_t max_stored_leaves = std::size_t{1} << 26);

// Graph export ---------------------------------------------------------------

enum class VertexRole { Internal, Leaf };

struct SubgraphEdge {
    Vertex from;
    Vertex to;
    int choice;
    friend bool operator==(const SubgraphEdge&, const SubgraphEdge&) = default;
};

struct SubgraphVertex {
    Vertex id;
    VertexRole role;
    friend bool operator==(const SubgraphVertex&, const SubgraphVertex&) = default;
};

/// T_n with one edge record per (internal vertex, choice); parallel edges are
/// kept. Vertices descend by index, edges by source then choice.
struct Subgraph {
    Vertex root = 0;
    std::vector<SubgraphVertex> vertices;
    std::vector<SubgraphEdge> edges;
};

inline constexpr int kSubgraphSchemaVersion = 1;

enum class GraphFormat { Dot, Json };

Subgraph build_subgraph(const Trajectory& traj, Vertex n);
std::string to_dot(const Subgraph& g);
std::string to_json(const Subgraph& g);
/// Throws std::invalid_argument on a schema mismatch.
Subgraph subgraph_from_json(const std::string& text);

std::string export_subgraph(const Trajectory& traj, Vertex n, GraphFormat format);

}  // namespace surf

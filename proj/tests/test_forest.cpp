#include <doctest.h>

#include <algorithm>
#include <deque>
#include <set>
#include <vector>

#include "corpus.hpp"
#include "surf/forest.hpp"

using namespace surf;

namespace {

// Breadth-first closure of n under the parent map, held in an ordered set.
std::set<Vertex> reach_set_oracle(const Trajectory& t, Vertex n) {
    std::set<Vertex> seen{n};
    std::deque<Vertex> queue{n};
    while (!queue.empty()) {
        const Vertex m = queue.front();
        queue.pop_front();
        if (m <= 0) continue;
        for (int j = 0; j < t.k(); ++j)
            if (seen.insert(t.parent(m, j)).second) queue.push_back(t.parent(m, j));
    }
    return seen;
}

std::vector<Vertex> min_chain_oracle(const Trajectory& t, Vertex n) {
    std::vector<Vertex> out;
    Vertex m = n;
    while (m >= 1) {
        out.push_back(m);
        const auto d = t.delays_at(m);
        m -= *std::min_element(d.begin(), d.end());
    }
    out.push_back(m);
    return out;
}

// Smallest v in [1, last] that lies on the min-chain of every n in [v, H].
std::optional<Vertex> coalescence_oracle(const Trajectory& t, Vertex last) {
    for (Vertex v = 1; v <= last; ++v) {
        bool ok = true;
        for (Vertex n = v; n <= t.horizon() && ok; ++n) {
            const auto c = min_chain_oracle(t, n);
            ok = std::find(c.begin(), c.end(), v) != c.end();
        }
        if (ok) return v;
    }
    return std::nullopt;
}

Trajectory from_rows(const DistributionSpec& spec, int k, std::vector<std::int64_t> delays,
                     LeafConfig config = LeafConfig::IidUniform) {
    return trajectory_from_delays(DelayDistribution(spec), k, std::move(delays), LeafPool(config, 3));
}

}  // namespace

TEST_CASE("reach statistics on hand-built trajectories") {
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 1), 1);
    const auto s = reach_stats(unit, 5, true);
    CHECK(s.lambda == 1);
    CHECK(s.r_leaf == 0);
    CHECK(s.l_leaf == 0);
    CHECK(s.reach_size == 6);
    CHECK(s.leaves == std::vector<Vertex>{0});

    const auto two = from_rows(ZetaPareto{0.6}, 2, {3, 7});
    const auto s2 = reach_stats(two, 1, true);
    CHECK(s2.leaves == std::vector<Vertex>{-6, -2});
    CHECK(s2.lambda == 2);
    CHECK(s2.r_leaf == -2);
    CHECK(s2.l_leaf == -6);

    CHECK_THROWS_AS(reach_stats(two, 2), std::out_of_range);
    CHECK_THROWS_AS(reach_stats(two, 0), std::out_of_range);
    const auto lean = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 1), 1, false);
    CHECK_THROWS_AS(reach_stats(lean, 5), std::logic_error);
}

TEST_CASE("reach statistics match the breadth-first oracle on the corpus") {
    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        for (Vertex n = 1; n <= t.horizon(); ++n) {
            const auto oracle = reach_set_oracle(t, n);
            std::vector<Vertex> leaves;
            for (Vertex v : oracle)
                if (v <= 0) leaves.push_back(v);
            const auto s = reach_stats(t, n, true);
            REQUIRE(s.leaves == leaves);
            REQUIRE(s.lambda == static_cast<std::int64_t>(leaves.size()));
            REQUIRE(s.reach_size == static_cast<std::int64_t>(oracle.size()));
            REQUIRE(s.l_leaf == leaves.front());
            REQUIRE(s.r_leaf == leaves.back());
        }
    }
}

TEST_CASE("recursion equals the brute-force argmin over reached leaves") {
    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        for (Vertex n = 1; n <= t.horizon(); ++n) {
            const auto [color, value] = brute_force_cv(t, n);
            REQUIRE(color == t.color(n));
            REQUIRE(value == t.value(n));
        }
    }
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 8), 1);
    CHECK(brute_force_cv(unit, 7) == std::pair<Vertex, double>{0, LeafPool(LeafConfig::IidUniform, 8).value(0)});
}

TEST_CASE("structural invariants on the corpus") {
    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        const auto curves = extreme_leaf_curves(t);
        const auto counts = leaf_count_curve(t);
        for (Vertex n = 1; n <= t.horizon(); ++n) {
            const auto s = reach_stats(t, n, true);
            const std::set<Vertex> reach = reach_set_oracle(t, n);
            REQUIRE(s.lambda >= 1);
            REQUIRE(s.lambda <= s.reach_size);
            REQUIRE(s.l_leaf <= s.r_leaf);
            REQUIRE(s.r_leaf <= 0);
            REQUIRE(-s.l_leaf >= -s.r_leaf);
            REQUIRE(s.lambda <= -s.l_leaf + 1);
            REQUIRE(curves.leftmost[static_cast<std::size_t>(n - 1)] == s.l_leaf);
            REQUIRE(curves.rightmost[static_cast<std::size_t>(n - 1)] == s.r_leaf);
            REQUIRE(counts[static_cast<std::size_t>(n - 1)] == s.lambda);

            auto kinds = std::vector<ChainKind>{ChainKind::min_chain()};
            for (int j = 0; j < t.k(); ++j) kinds.push_back(ChainKind::z_chain(j));
            for (const auto kind : kinds) {
                const auto c = chain(t, n, kind);
                for (Vertex v : c.vertices) REQUIRE(reach.count(v) == 1);
                REQUIRE(std::binary_search(s.leaves.begin(), s.leaves.end(), c.terminal_leaf));
                REQUIRE(s.l_leaf <= c.terminal_leaf);
            }
        }
    }
}

TEST_CASE("chains") {
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 1), 1);
    CHECK(chain(unit, 4, ChainKind::min_chain()).vertices == std::vector<Vertex>{4, 3, 2, 1, 0});
    CHECK(chain(unit, 4, ChainKind::z_chain(1)).terminal_leaf == 0);

    // First step of choice 0 jumps n + 4 from n = 3.
    const auto jump = from_rows(ZetaPareto{0.6}, 2, {1, 1, 1, 2, 7, 1});
    const auto c = chain(jump, 3, ChainKind::z_chain(0));
    CHECK(c.vertices == std::vector<Vertex>{3, -4});
    CHECK(c.terminal_leaf == -4);
    CHECK_THROWS_AS(chain(jump, 3, ChainKind::z_chain(2)), std::out_of_range);

    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        for (Vertex n : {Vertex{1}, t.horizon() / 2, t.horizon()}) {
            const auto mc = chain(t, n, ChainKind::min_chain());
            REQUIRE(mc.vertices == min_chain_oracle(t, n));
            for (std::size_t i = 0; i + 1 < mc.vertices.size(); ++i)
                REQUIRE(mc.vertices[i] - mc.vertices[i + 1] == t.min_delay(mc.vertices[i]));
            const auto zc = chain(t, n, ChainKind::z_chain(t.k() - 1));
            for (std::size_t i = 0; i + 1 < zc.vertices.size(); ++i)
                REQUIRE(zc.vertices[i] - zc.vertices[i + 1] == t.delay(zc.vertices[i], t.k() - 1));
            for (std::size_t i = 0; i + 1 < zc.vertices.size(); ++i) REQUIRE(zc.vertices[i] >= 1);
            REQUIRE(zc.vertices.back() <= 0);
        }
    }
}

TEST_CASE("J_n and longest-edge leaves") {
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 1), 1);
    for (Vertex n = 1; n <= 10; ++n) CHECK(j_count(unit, n) == 1);
    const auto unit_stats = longest_edge_leaf_stats(unit, 6);
    CHECK(unit_stats.distinct_leaves == 1);
    CHECK(unit_stats.chain_multiplicity.at(0) == 1);

    // Unit delays: only m = 1 reaches a leaf.
    const auto unit_rows = from_rows(Geometric{0.5}, 2, {1, 1, 1, 1, 1, 1});
    CHECK(j_count(unit_rows, 3) == 1);
    const auto all = from_rows(Geometric{0.5}, 2, {1, 1, 2, 1, 3, 1});
    // Min-chain of 3 is 3 -> 2 -> 1 -> 0; max delays 3 >= 3, 2 >= 2, 1 >= 1.
    CHECK(j_count(all, 3) == 3);
    const auto skip = from_rows(Geometric{0.5}, 2, {1, 1, 1, 1, 1, 2});
    // 3 -> 2 -> 1 -> 0; only m = 1 (max 1) reaches a leaf; m = 3 has max 2 < 3.
    CHECK(j_count(skip, 3) == 1);

    std::uint64_t checked = 0;
    for (const auto& e : testing::corpus_entries()) {
        if (checked++ >= 100) break;
        const auto t = testing::build(e);
        for (Vertex n : {Vertex{1}, t.horizon() / 3, t.horizon()}) {
            const auto j = j_count(t, n);
            const auto ls = longest_edge_leaf_stats(t, n);
            std::int64_t total = 0;
            for (const auto& [leaf, count] : ls.chain_multiplicity) {
                REQUIRE(leaf <= 0);
                REQUIRE(ls.all_multiplicity.at(leaf) >= count);
                total += count;
            }
            REQUIRE(total == j);
            REQUIRE(ls.distinct_leaves <= j);
            // D_{n,leaf} recount straight from the definition.
            for (const auto& [leaf, count] : ls.all_multiplicity) {
                std::int64_t d = 0;
                for (Vertex m = 1; m <= n; ++m) d += t.max_delay(m) == m - leaf;
                REQUIRE(d == count);
            }
        }
    }
}

TEST_CASE("coalescence estimate") {
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 40, LeafPool(LeafConfig::IidUniform, 1), 1);
    CHECK(coalescence_estimate(unit) == 1);

    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        const auto est = coalescence_estimate(t, t.horizon());
        REQUIRE(est == coalescence_oracle(t, t.horizon()));
        // A step whose shortest delay reaches a leaf cuts every smaller vertex
        // off its min-chain.
        for (Vertex n = 1; n <= t.horizon(); ++n)
            if (t.min_delay(n) >= n && n > 1) REQUIRE((!est.has_value() || *est >= n));
        const auto half = coalescence_estimate(t);
        if (half) REQUIRE(*half <= std::max<Vertex>(1, t.horizon() / 2));
    }

    // Moderate tails: an estimate exists in at least 90% of runs.
    DelayDistribution d(ZetaPareto{0.6});
    int found = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        const auto seed = run_seed(2718, r);
        const auto t = simulate(d, 2, 10'000, LeafPool::from_master(LeafConfig::IidUniform, seed), seed);
        found += coalescence_estimate(t).has_value();
    }
    INFO("found = " << found);
    CHECK(found >= 180);
}

TEST_CASE("subgraph export") {
    const auto unit = simulate(DelayDistribution(Table{{1.0}}), 2, 10, LeafPool(LeafConfig::IidUniform, 1), 1);
    const auto g = build_subgraph(unit, 3);
    CHECK(g.vertices.size() == 4);
    CHECK(g.edges.size() == 6);
    CHECK(g.vertices.back() == SubgraphVertex{0, VertexRole::Leaf});
    const auto dot = to_dot(g);
    CHECK(dot.rfind("digraph T {", 0) == 0);
    CHECK(dot.find("  3 [role=internal];") != std::string::npos);
    CHECK(dot.find("  0 [role=leaf];") != std::string::npos);
    CHECK(dot.find("  1 -> 0 [choice=1];") != std::string::npos);

    for (const auto& e : testing::corpus_entries()) {
        const auto t = testing::build(e);
        const auto sub = build_subgraph(t, t.horizon());
        const auto back = subgraph_from_json(export_subgraph(t, t.horizon(), GraphFormat::Json));
        REQUIRE(back.root == sub.root);
        REQUIRE(back.vertices == sub.vertices);
        REQUIRE(back.edges == sub.edges);
        const auto s = reach_stats(t, t.horizon());
        REQUIRE(static_cast<std::int64_t>(sub.vertices.size()) == s.reach_size);
        REQUIRE(static_cast<std::int64_t>(sub.edges.size()) == (s.reach_size - s.lambda) * t.k());
    }
    CHECK_THROWS_AS(subgraph_from_json("{}"), std::invalid_argument);
    CHECK_THROWS_AS(subgraph_from_json("not json"), std::invalid_argument);
    CHECK_THROWS_AS(subgraph_from_json(R"({"schema":"surf.subgraph","version":99})"), std::invalid_argument);
}

TEST_CASE("leaf share of the n = 150 subgraph orders by tail weight") {
    const DelayDistribution light(ZetaPareto{1.2}), moderate(ZetaPareto{0.6}), heavy(ZetaPareto{0.3});
    auto leaf_share = [](const DelayDistribution& d, std::uint64_t seed) {
        const auto t = simulate(d, 2, 150, LeafPool::from_master(LeafConfig::IidUniform, seed), seed);
        const auto s = reach_stats(t, 150);
        return double(s.lambda) / double(s.reach_size);
    };
    int ordered = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto seed = run_seed(150, r);
        ordered += leaf_share(heavy, seed) > leaf_share(moderate, seed) && leaf_share(moderate, seed) > leaf_share(light, seed);
    }
    INFO("ordered = " << ordered);
    CHECK(ordered > 50);
}

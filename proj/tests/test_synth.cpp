#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "htgl/synth.hpp"

using htgl::SynthConfig;
using htgl::SynthKind;
using htgl::SynthOutput;

namespace {

bool graphs_equal(const htgl::HTGraph& a, const htgl::HTGraph& b) {
    if (a.T() != b.T()) return false;
    for (std::size_t t = 0; t < a.T(); ++t) {
        if (a.snapshots[t].edges != b.snapshots[t].edges) return false;
        for (std::size_t v = 0; v < a.node_types.size(); ++v)
            if (a.snapshots[t].features[v].value() != b.snapshots[t].features[v].value())
                return false;
    }
    return true;
}

SynthConfig small_planted() {
    SynthConfig cfg;
    cfg.kind = SynthKind::PlantedLink;
    cfg.seed = 42;
    cfg.T = 4;
    cfg.n_primary = 24;
    cfg.n_secondary = 12;
    cfg.communities = 4;
    cfg.feature_dim = 6;
    return cfg;
}

}  // namespace

TEST_CASE("same seed yields identical graphs, different seed differs") {
    SynthConfig cfg = small_planted();
    SynthOutput a = htgl::generate_synthetic(cfg);
    SynthOutput b = htgl::generate_synthetic(cfg);
    CHECK(graphs_equal(a.graph, b.graph));
    CHECK(a.community == b.community);
    CHECK(a.regress_targets == b.regress_targets);

    cfg.seed = 43;
    SynthOutput c = htgl::generate_synthetic(cfg);
    CHECK_FALSE(graphs_equal(a.graph, c.graph));
}

TEST_CASE("density one saturates a bipartite relation") {
    SynthConfig cfg;
    cfg.kind = SynthKind::Generic;
    cfg.T = 3;
    cfg.types = {{"l", 2, 2, ""}, {"r", 2, 2, ""}};
    cfg.relations = {{"lr", "l", "r", 1.0}};
    SynthOutput out = htgl::generate_synthetic(cfg);
    for (const auto& snap : out.graph.snapshots) CHECK(snap.edges[0].size() == 4);
}

TEST_CASE("invalid density and counts are rejected") {
    SynthConfig cfg;
    cfg.kind = SynthKind::Generic;
    cfg.types = {{"l", 2, 2, ""}};
    cfg.relations = {{"ll", "l", "l", 0.0}};
    CHECK_THROWS_AS(htgl::generate_synthetic(cfg), std::invalid_argument);
    cfg.relations = {{"ll", "l", "l", 1.5}};
    CHECK_THROWS_AS(htgl::generate_synthetic(cfg), std::invalid_argument);
    cfg.relations.clear();
    cfg.types = {{"l", 0, 2, ""}};
    CHECK_THROWS_AS(htgl::generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("planted communities make non-edges exactly the cross-community pairs") {
    SynthOutput out = htgl::generate_synthetic(small_planted());
    const std::size_t n = out.graph.node_types[0].count;
    const std::size_t rel = out.graph.relation_index("coauthor");
    for (const auto& snap : out.graph.snapshots) {
        std::set<std::pair<std::uint32_t, std::uint32_t>> edges(snap.edges[rel].begin(),
                                                                snap.edges[rel].end());
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const bool linked = edges.count({i, j}) > 0;
                const bool same = out.community[i] == out.community[j];
                CHECK(linked == same);  // the community oracle is exact
            }
    }
}

TEST_CASE("planted features cluster around community prototypes") {
    SynthConfig cfg = small_planted();
    cfg.noise = 0.05;
    SynthOutput out = htgl::generate_synthetic(cfg);
    const auto& f0 = out.graph.snapshots[0].features[0];
    const std::size_t f = cfg.feature_dim;
    // same community, different nodes: distance ~ noise; different community: O(1)
    double same_d2 = 0.0, cross_d2 = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
        same_d2 += std::pow(f0.value()[0 * f + j] - f0.value()[4 * f + j], 2);   // 0 and 4 share community
        cross_d2 += std::pow(f0.value()[0 * f + j] - f0.value()[1 * f + j], 2);  // 0 and 1 differ
    }
    CHECK(same_d2 < 0.25);
    CHECK(cross_d2 > same_d2);
}

TEST_CASE("regime switch moves the community signal between side types") {
    SynthConfig cfg;
    cfg.kind = SynthKind::RegimeSwitch;
    cfg.seed = 7;
    cfg.T = 4;
    cfg.switch_at = 2;
    cfg.n_target = 8;
    cfg.n_side = 16;
    cfg.regime_communities = 4;
    cfg.feature_dim = 8;
    cfg.noise = 0.05;
    SynthOutput out = htgl::generate_synthetic(cfg);

    const std::size_t a_idx = out.graph.type_index("a");
    const std::size_t f = cfg.feature_dim;
    // a-nodes 0 and 8 share host v0; compare their features early vs late
    auto dist2 = [&](std::size_t t, std::size_t type, std::size_t u, std::size_t v) {
        const auto& feat = out.graph.snapshots[t].features[type];
        double d = 0.0;
        for (std::size_t j = 0; j < f; ++j)
            d += std::pow(feat.value()[u * f + j] - feat.value()[v * f + j], 2);
        return d;
    };
    CHECK(dist2(0, a_idx, 0, 8) < 0.25);  // informative: both near the prototype
    CHECK(dist2(3, a_idx, 0, 8) > 1.0);   // pure noise after the switch

    const std::size_t b_idx = out.graph.type_index("b");
    CHECK(dist2(0, b_idx, 0, 8) > 1.0);
    CHECK(dist2(3, b_idx, 0, 8) < 0.25);

    CHECK(out.target_relation == "vv");
    // switch position validated
    cfg.switch_at = 0;
    CHECK_THROWS_AS(htgl::generate_synthetic(cfg), std::invalid_argument);
    cfg.switch_at = 4;
    CHECK_THROWS_AS(htgl::generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("planted instance at acceptance scale stays tractable") {
    SynthConfig cfg;  // defaults: 1024 + 1024 nodes, T = 8
    SynthOutput out = htgl::generate_synthetic(cfg);
    CHECK(out.graph.node_types[0].count + out.graph.node_types[1].count == 2048);
    CHECK(out.graph.T() == 8);
    // every community is complete: 64 communities of 16 authors -> 16*15 ordered pairs each
    CHECK(out.graph.snapshots[0].edges[0].size() == 64 * 16 * 15);
}

// Shared small dataset for model-level tests: two node types with distinct
// feature widths, a same-type and a cross-type relation plus self loops,
// three snapshots of seeded random structure.
#pragma once

#include <map>
#include <random>
#include <string>

#include "htgl/graph.hpp"
#include "htgl/params.hpp"
#include "htgl/prompt.hpp"
#include "htgl/rng.hpp"

namespace fixtures {

inline htgl::HTGraph toy_graph(std::uint64_t seed = 7, std::size_t T = 3) {
    htgl::HTGraph g;
    g.node_types.push_back({"alpha", 5, 3, "Primary entities under forecast."});
    g.node_types.push_back({"beta", 5, 2, "Side entities influencing the primary ones."});
    g.relation_types.push_back({"aa", "alpha", "alpha"});
    g.relation_types.push_back({"ba", "beta", "alpha"});
    std::mt19937_64 gen(seed);
    for (std::size_t t = 0; t < T; ++t) {
        htgl::Snapshot snap;
        for (std::size_t r = 0; r < 2; ++r) {
            htgl::EdgeList edges;
            const std::size_t m = 4 + htgl::rng::bounded(gen, 4);
            for (std::size_t e = 0; e < m; ++e) {
                edges.emplace_back(std::uint32_t(htgl::rng::bounded(gen, 5)),
                                   std::uint32_t(htgl::rng::bounded(gen, 5)));
            }
            snap.edges.push_back(std::move(edges));
        }
        for (const auto& nt : g.node_types) {
            htgl::Tensor x = htgl::Tensor::zeros({nt.count, nt.feature_dim});
            for (double& v : x.value()) v = htgl::rng::gaussian(gen);
            snap.features.push_back(x);
        }
        g.snapshots.push_back(std::move(snap));
    }
    htgl::add_self_relation(g);
    g.validate();
    return g;
}

inline htgl::ModelConfig toy_config() {
    htgl::ModelConfig cfg;
    cfg.dim = 4;
    cfg.heads = 1;
    cfg.layers = 2;
    cfg.window = 2;
    cfg.horizon = 1;
    cfg.llm_dim = 8;
    return cfg;
}

inline std::map<std::string, htgl::TypeEmbedding> toy_embeddings(const htgl::HTGraph& g,
                                                                 std::size_t dim = 8) {
    htgl::ProviderConfig pc;
    pc.kind = "fallback";
    pc.dim = dim;
    htgl::EmbeddingProvider provider(pc);
    return htgl::embed_dataset(g, provider);
}

}  // namespace fixtures

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htgl/graph.hpp"

namespace htgl {

enum class SynthKind { Generic, PlantedLink, RegimeSwitch };

struct SynthTypeSpec {
    std::string name;
    std::size_t count = 0;
    std::size_t feature_dim = 0;
    std::string description;
};

struct SynthRelationSpec {
    std::string name;
    std::string src;
    std::string dst;
    double density = 0.1;  // Bernoulli edge probability per ordered pair
};

struct SynthConfig {
    SynthKind kind = SynthKind::PlantedLink;
    std::uint64_t seed = 1;
    std::size_t T = 8;
    double noise = 0.1;  // feature noise scale around community prototypes

    // Generic: explicit types and relations.
    std::vector<SynthTypeSpec> types;
    std::vector<SynthRelationSpec> relations;

    // PlantedLink: two types ("author", "paper") sharing round-robin
    // communities; co-authorship is complete within a community.
    std::size_t n_primary = 1024;
    std::size_t n_secondary = 1024;
    std::size_t communities = 64;
    std::size_t feature_dim = 16;

    // RegimeSwitch: target type "v" with side types "a" and "b"; community
    // signal lives in a's features before switch_at and in b's features after.
    std::size_t n_target = 64;
    std::size_t n_side = 128;
    std::size_t regime_communities = 8;
    std::size_t switch_at = 4;  // first snapshot of the second regime
};

struct SynthOutput {
    HTGraph graph;
    std::string target_type;      // type the tasks predict over
    std::string target_relation;  // link-task relation ("" for Generic)
    // Ground truth: community id per target-type node. Doubles as the class
    // label set; regress_targets holds a per-node scalar derived from it.
    std::vector<std::size_t> community;
    std::vector<double> regress_targets;
};

/// Deterministic under seed: identical configs produce identical graphs,
/// byte-for-byte after serialization.
SynthOutput generate_synthetic(const SynthConfig& cfg);

}  // namespace htgl

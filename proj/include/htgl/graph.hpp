#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "htgl/sparse.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

/// Directed edge as stored in datasets: (source index, destination index).
using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

struct NodeTypeMeta {
    std::string name;
    std::size_t count = 0;
    std::size_t feature_dim = 0;
    std::string description;
};

struct RelationTypeMeta {
    std::string name;
    std::string src_type;
    std::string dst_type;
};

/// One timestamp: edge list per relation type, feature matrix per node type.
/// Both vectors are parallel to the graph's type declarations.
struct Snapshot {
    std::vector<EdgeList> edges;
    std::vector<Tensor> features;  // n_v x feature_dim, constants
};

struct HTGraph {
    std::vector<NodeTypeMeta> node_types;
    std::vector<RelationTypeMeta> relation_types;
    std::vector<Snapshot> snapshots;

    std::size_t T() const { return snapshots.size(); }
    std::size_t type_index(const std::string& name) const;
    std::size_t relation_index(const std::string& name) const;
    bool has_relation(const std::string& name) const;

    /// Relations whose destination is the given type, in declaration order.
    /// This ordering defines the relation axis of every attention vector.
    std::vector<std::size_t> relations_into(std::size_t type) const;

    /// Checks every structural invariant; throws with the offending location.
    void validate() const;
};

/// Reads a dataset directory via its manifest file.
HTGraph load_dataset(const std::string& manifest_path);

/// Writes the manifest plus per-snapshot edge/feature files under dir.
/// Floats are serialized with round-trip precision.
void write_dataset(const HTGraph& g, const std::string& dir);

enum class NormKind { Row, Sym };

/// Builds the normalized adjacency for aggregation into destination nodes.
/// Entries are (destination row, source column). Row kind divides by the
/// destination's in-degree; Sym divides by sqrt(in-degree * out-degree).
/// Zero-degree rows stay all-zero.
SparseMatrix normalize_adjacency(const EdgeList& dst_src, std::size_t n_dst, std::size_t n_src,
                                 NormKind kind);

/// Normalized adjacency of one relation at one timestamp, flipping the stored
/// (src, dst) edges into destination-major orientation.
SparseMatrix relation_adjacency(const HTGraph& g, std::size_t relation, std::size_t t,
                                NormKind kind);

/// Default normalization: symmetric for same-type relations, row otherwise.
NormKind default_norm_kind(const RelationTypeMeta& rel);

/// Appends one identity relation "self.<type>" per node type so every type has
/// at least one inbound relation. Idempotent (checked by name).
void add_self_relation(HTGraph& g);

/// Forecast targets, each the index of the first predicted snapshot; the model
/// consumes snapshots [t - window, t - 1] and predicts [t, t + horizon - 1].
struct TemporalSplit {
    std::size_t window = 1;   // past snapshots consumed
    std::size_t horizon = 1;  // future steps predicted
    std::vector<std::size_t> train, val, test;
};

/// Last n_test valid targets -> test, preceding n_val -> validation, the rest
/// -> training. Requires at least one training target.
TemporalSplit split_temporal(const HTGraph& g, std::size_t window, std::size_t horizon,
                             std::size_t n_val, std::size_t n_test);

}  // namespace htgl

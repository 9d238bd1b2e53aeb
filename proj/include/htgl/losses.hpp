#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

using NodePairs = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

/// Ranking loss over node embeddings: -sum log sig(h_i . h_j) over positive
/// pairs minus sum log sig(-h_i . h_j) over negative pairs. A sum, not a
/// mean. Positives must be non-empty; negatives may be.
Tensor link_loss(Tape& tape, const Tensor& h, const NodePairs& pos, const NodePairs& neg);

/// Summed cross entropy of row i against labels[i]; one label per logit row.
Tensor classify_loss(Tape& tape, const Tensor& logits, const std::vector<std::size_t>& labels);

/// Mean absolute error of a one-column prediction against targets.
Tensor regress_loss(Tape& tape, const Tensor& pred, const std::vector<double>& targets);

/// Uniform sample of `count` ordered node pairs absent from `relation` at
/// snapshot t, without duplicates within the draw. Deterministic under seed.
/// Throws when fewer than `count` distinct non-edges exist.
NodePairs sample_negatives(const HTGraph& g, std::size_t relation, std::size_t t,
                           std::size_t count, std::uint64_t seed);

}  // namespace htgl

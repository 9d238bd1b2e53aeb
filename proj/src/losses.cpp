#include "htgl/losses.hpp"

#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "htgl/rng.hpp"

namespace htgl {

Tensor link_loss(Tape& tape, const Tensor& h, const NodePairs& pos, const NodePairs& neg) {
    if (pos.empty()) {
        throw std::invalid_argument("link loss: empty positive set");
    }
    Tensor loss = tape.sum_all(tape.logsigmoid(tape.pair_dot(h, pos)));
    if (!neg.empty()) {
        Tensor flipped = tape.scale_add(tape.pair_dot(h, neg), -1.0, 0.0);
        loss = tape.add(loss, tape.sum_all(tape.logsigmoid(flipped)));
    }
    return tape.scale_add(loss, -1.0, 0.0);
}

Tensor classify_loss(Tape& tape, const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (labels.size() != logits.rows()) {
        throw std::invalid_argument("classify loss: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(logits.rows()) + " rows");
    }
    std::vector<std::size_t> rows(labels.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return tape.cross_entropy_sum(logits, rows, labels);
}

Tensor regress_loss(Tape& tape, const Tensor& pred, const std::vector<double>& targets) {
    if (targets.empty()) {
        throw std::invalid_argument("regress loss: empty target set");
    }
    return tape.mae(pred, targets);
}

NodePairs sample_negatives(const HTGraph& g, std::size_t relation, std::size_t t,
                           std::size_t count, std::uint64_t seed) {
    if (relation >= g.relation_types.size()) {
        throw std::invalid_argument("sample_negatives: relation index out of range");
    }
    if (t >= g.T()) {
        throw std::invalid_argument("sample_negatives: snapshot index out of range");
    }
    const auto& rel = g.relation_types[relation];
    const std::size_t n_src = g.node_types[g.type_index(rel.src_type)].count;
    const std::size_t n_dst = g.node_types[g.type_index(rel.dst_type)].count;
    const auto& edges = g.snapshots[t].edges[relation];
    std::set<std::pair<std::uint32_t, std::uint32_t>> taken(edges.begin(), edges.end());
    const std::size_t space = n_src * n_dst - taken.size();
    if (space < count) {
        throw std::invalid_argument("sample_negatives: relation '" + rel.name + "' at snapshot " +
                                    std::to_string(t) + " leaves only " + std::to_string(space) +
                                    " non-edges, need " + std::to_string(count));
    }
    std::mt19937_64 gen(seed);
    NodePairs out;
    out.reserve(count);
    while (out.size() < count) {
        const std::pair<std::uint32_t, std::uint32_t> cand{
            std::uint32_t(rng::bounded(gen, n_src)), std::uint32_t(rng::bounded(gen, n_dst))};
        if (taken.insert(cand).second) out.push_back(cand);
    }
    return out;
}

}  // namespace htgl

#include "htgl/model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace htgl {

Tensor project_features(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b) {
    return tape.add_bias(tape.matmul(x, W), b);
}

Tensor aggregate_relation(Tape& tape, const SparseMatrix& adj, const Tensor& h_src) {
    return tape.activation(Activation::Elu, tape.spmm(adj, h_src));
}

Tensor dynamic_attention_step(Tape& tape, const Tensor& h_rel, const Tensor& e_prev,
                              const GruParams& cell) {
    return tape.gru_cell(h_rel, e_prev, cell);
}

std::pair<Tensor, Tensor> fuse_relations(Tape& tape, const std::vector<Tensor>& e_set,
                                         const std::vector<Tensor>& h_set, double shift) {
    if (e_set.empty() || e_set.size() != h_set.size()) {
        throw std::invalid_argument("fuse_relations: need matching non-empty score and "
                                    "representation sets");
    }
    std::vector<Tensor> pooled;
    pooled.reserve(e_set.size());
    for (const Tensor& e : e_set) {
        Tensor m = tape.mean_all(e);
        pooled.push_back(shift == 0.0 ? m : tape.scale_add(m, 1.0, shift));
    }
    Tensor alpha = tape.softmax(tape.stack_scalars(pooled));
    return {alpha, tape.weighted_sum(h_set, alpha)};
}

std::vector<Tensor> temporal_project(Tape& tape, const std::vector<Tensor>& steps,
                                     const Tensor& W, const Tensor& b) {
    if (steps.empty() || W.shape().size() != 2 || W.rows() != steps.size()) {
        throw std::invalid_argument("temporal projection: weight rows " +
                                    (W.shape().size() == 2 ? std::to_string(W.rows())
                                                           : shape_str(W.shape())) +
                                    " must equal window length " + std::to_string(steps.size()));
    }
    if (b.shape() != std::vector<std::size_t>{W.cols()}) {
        throw std::invalid_argument("temporal projection: bias shape " + shape_str(b.shape()) +
                                    " must be [" + std::to_string(W.cols()) + "]");
    }
    std::vector<Tensor> out;
    out.reserve(W.cols());
    for (std::size_t s = 0; s < W.cols(); ++s) {
        out.push_back(tape.add_entry(tape.weighted_sum_col(steps, W, s), b, s));
    }
    return out;
}

Tensor mlp_head(Tape& tape, const Tensor& h, const Tensor& W1, const Tensor& b1, const Tensor& W2,
                const Tensor& b2) {
    Tensor hidden = tape.activation(Activation::Elu, tape.add_bias(tape.matmul(h, W1), b1));
    return tape.add_bias(tape.matmul(hidden, W2), b2);
}

Tensor SimplifiedAggregator::aggregate(Tape& tape, const HTGraph& g, std::size_t /*layer*/,
                                       std::size_t rel_index, std::size_t t, const Tensor& h_src,
                                       const Tensor& /*h_dst*/) {
    const auto key = std::make_pair(rel_index, t);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_
                 .emplace(key, relation_adjacency(g, rel_index, t,
                                                  default_norm_kind(g.relation_types[rel_index])))
                 .first;
    }
    return aggregate_relation(tape, it->second, h_src);
}

void DynamicGruScorer::begin_layer(Tape& tape, std::size_t /*layer*/, const HTGraph& g,
                                   const InitCoefficients& e0, std::size_t heads,
                                   std::size_t /*t0*/) {
    graph_ = &g;
    state_.assign(g.node_types.size(), {});
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        const auto rels = g.relations_into(v);
        if (e0.e0[v].size() != rels.size()) {
            throw std::invalid_argument("initial coefficients for type '" + g.node_types[v].name +
                                        "' cover " + std::to_string(e0.e0[v].size()) +
                                        " relations, graph has " + std::to_string(rels.size()));
        }
        for (std::size_t p = 0; p < rels.size(); ++p) {
            state_[v].push_back(tape.broadcast_scalar(tape.select(e0.e0[v], p),
                                                      g.node_types[v].count, heads));
        }
    }
}

Tensor DynamicGruScorer::score(Tape& tape, std::size_t layer, std::size_t /*ti*/,
                               std::size_t type, std::size_t rel_pos, std::size_t rel_index,
                               const Tensor& h_rel) {
    const std::string& rel_name = graph_->relation_types[rel_index].name;
    Tensor next = dynamic_attention_step(tape, h_rel, state_[type][rel_pos],
                                         params_.gru(layer, rel_name));
    state_[type][rel_pos] = next;
    return next;
}

ForwardResult forward(Tape& tape, const HTGraph& g, const ModelParams& params,
                      const ModelConfig& cfg, std::size_t target_type,
                      const InitCoefficients& e0, const ForwardOptions& opt,
                      AttentionScorer* scorer, Aggregator* aggregator) {
    cfg.validate();
    if (target_type >= g.node_types.size()) {
        throw std::invalid_argument("target type index out of range");
    }
    if (opt.window_end + 1 < cfg.window || opt.window_end >= g.T()) {
        throw std::invalid_argument("window [" + std::to_string(int64_t(opt.window_end) -
                                                                int64_t(cfg.window) + 1) +
                                    ", " + std::to_string(opt.window_end) +
                                    "] does not fit in " + std::to_string(g.T()) + " snapshots");
    }
    if (e0.e0.size() != g.node_types.size()) {
        throw std::invalid_argument("initial coefficients cover " + std::to_string(e0.e0.size()) +
                                    " types, graph has " + std::to_string(g.node_types.size()));
    }

    DynamicGruScorer default_scorer(params);
    SimplifiedAggregator default_aggregator;
    if (!scorer) scorer = &default_scorer;
    if (!aggregator) aggregator = &default_aggregator;

    const std::size_t n_types = g.node_types.size();
    const std::size_t t0 = opt.window_end + 1 - cfg.window;

    // layer-1 inputs: per-type affine projection, weights shared across time
    std::vector<std::vector<Tensor>> inputs(n_types);
    for (std::size_t v = 0; v < n_types; ++v) {
        Tensor W = params.at("proj." + g.node_types[v].name + ".W");
        Tensor b = params.at("proj." + g.node_types[v].name + ".b");
        for (std::size_t ti = 0; ti < cfg.window; ++ti) {
            inputs[v].push_back(project_features(tape, g.snapshots[t0 + ti].features[v], W, b));
        }
    }

    ForwardResult res;
    res.trace.alpha.resize(cfg.layers);
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        auto& layer_trace = res.trace.alpha[layer - 1];
        layer_trace.assign(cfg.window, std::vector<std::vector<double>>(n_types));
        scorer->begin_layer(tape, layer, g, e0, cfg.heads, t0);
        std::vector<std::vector<Tensor>> next(n_types, std::vector<Tensor>(cfg.window));
        for (std::size_t ti = 0; ti < cfg.window; ++ti) {
            const std::size_t t = t0 + ti;
            for (std::size_t v = 0; v < n_types; ++v) {
                const auto rels = g.relations_into(v);
                if (rels.empty()) {
                    throw std::invalid_argument("type '" + g.node_types[v].name +
                                                "' has no inbound relations; add self relations");
                }
                std::vector<Tensor> h_set, e_set;
                for (std::size_t p = 0; p < rels.size(); ++p) {
                    const std::size_t r = rels[p];
                    const std::size_t src = g.type_index(g.relation_types[r].src_type);
                    Tensor h_rel = aggregator->aggregate(tape, g, layer, r, t, inputs[src][ti],
                                                         inputs[v][ti]);
                    h_set.push_back(h_rel);
                    e_set.push_back(scorer->score(tape, layer, ti, v, p, r, h_rel));
                }
                auto [alpha, fused] = fuse_relations(tape, e_set, h_set, opt.coeff_shift);
                layer_trace[ti][v] = alpha.value();
                next[v][ti] = fused;
            }
        }
        inputs = std::move(next);
    }

    res.fused = inputs[target_type];
    res.projected = temporal_project(tape, res.fused, params.at("temporal.W"),
                                     params.at("temporal.b"));
    for (const Tensor& z : res.projected) {
        res.predictions.push_back(mlp_head(tape, z, params.at("head.1.W"), params.at("head.1.b"),
                                           params.at("head.2.W"), params.at("head.2.b")));
    }
    return res;
}

}  // namespace htgl

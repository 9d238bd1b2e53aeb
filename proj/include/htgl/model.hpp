#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/params.hpp"
#include "htgl/prompt.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

struct ForwardOptions {
    std::size_t window_end = 0;  // index of the last consumed snapshot
    /// Added to every per-relation pooled score before normalization; the
    /// normalized weights must not move (exercised by invariant tests).
    double coeff_shift = 0.0;
};

struct AlphaTrace {
    /// [layer][window position][type] -> one weight per inbound relation, in
    /// relations_into order.
    std::vector<std::vector<std::vector<std::vector<double>>>> alpha;
};

struct ForwardResult {
    std::vector<Tensor> predictions;  // per future step: n_target x head_out
    std::vector<Tensor> projected;    // per future step, before the head: n_target x dim
    std::vector<Tensor> fused;        // target type per window position, last layer
    AlphaTrace trace;
};

/// Produces the per-relation attention scores e^t during the temporal sweep.
/// The default implementation advances one recurrent chain per
/// (type, inbound relation); variants substitute stateless or differently
/// gated scorers. begin_layer resets chain state.
class AttentionScorer {
public:
    virtual ~AttentionScorer() = default;
    virtual void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g,
                             const InitCoefficients& e0, std::size_t heads, std::size_t t0) = 0;
    virtual Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                         std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) = 0;
};

/// Produces one relation's aggregated neighborhood representation.
class Aggregator {
public:
    virtual ~Aggregator() = default;
    virtual Tensor aggregate(Tape& tape, const HTGraph& g, std::size_t layer,
                             std::size_t rel_index, std::size_t t, const Tensor& h_src,
                             const Tensor& h_dst) = 0;
};

/// Degree-normalized sparse mean followed by ELU; no learnable weights. The
/// normalized adjacency per (relation, snapshot) is cached, so one instance
/// may be reused across layers and epochs of an unchanged graph.
class SimplifiedAggregator : public Aggregator {
public:
    Tensor aggregate(Tape& tape, const HTGraph& g, std::size_t layer, std::size_t rel_index,
                     std::size_t t, const Tensor& h_src, const Tensor& h_dst) override;

private:
    std::map<std::pair<std::size_t, std::size_t>, SparseMatrix> cache_;
};

/// Recurrent relation-level attention: e^t = cell(H^t, e^{t-1}) with
/// relation-specific weights, seeded from the initial coefficients.
class DynamicGruScorer : public AttentionScorer {
public:
    explicit DynamicGruScorer(const ModelParams& params) : params_(params) {}
    void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g, const InitCoefficients& e0,
                     std::size_t heads, std::size_t t0) override;
    Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                 std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) override;

private:
    const ModelParams& params_;
    const HTGraph* graph_ = nullptr;
    std::vector<std::vector<Tensor>> state_;  // [type][inbound position]
};

Tensor project_features(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b);
Tensor aggregate_relation(Tape& tape, const SparseMatrix& adj, const Tensor& h_src);
Tensor dynamic_attention_step(Tape& tape, const Tensor& h_rel, const Tensor& e_prev,
                              const GruParams& cell);

/// Pools each relation's scores to a scalar, normalizes across relations, and
/// mixes the per-relation representations. Returns (weights, mixture).
std::pair<Tensor, Tensor> fuse_relations(Tape& tape, const std::vector<Tensor>& e_set,
                                         const std::vector<Tensor>& h_set, double shift = 0.0);

/// Contracts the window axis: steps (window tensors of n x d) against
/// W (window x horizon) plus per-step bias. Returns horizon tensors.
std::vector<Tensor> temporal_project(Tape& tape, const std::vector<Tensor>& steps,
                                     const Tensor& W, const Tensor& b);

Tensor mlp_head(Tape& tape, const Tensor& h, const Tensor& W1, const Tensor& b1, const Tensor& W2,
                const Tensor& b2);

/// Full forward pass: project, run `layers` relational layers with attention
/// over the window, contract time, apply the shared head per future step.
/// Null scorer/aggregator select the defaults.
ForwardResult forward(Tape& tape, const HTGraph& g, const ModelParams& params,
                      const ModelConfig& cfg, std::size_t target_type,
                      const InitCoefficients& e0, const ForwardOptions& opt,
                      AttentionScorer* scorer = nullptr, Aggregator* aggregator = nullptr);

}  // namespace htgl

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/model.hpp"
#include "htgl/params.hpp"
#include "htgl/prompt.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

/// How the relation coefficients start before the first snapshot.
enum class InitKind { Llm, Random, Average, Zero };
/// How the coefficients evolve across snapshots.
enum class AttentionKind { Dynamic, Projected, SelfAttention, Gated, Lstm };
/// How each relation pools its neighborhood.
enum class AggregationKind { Simplified, Gcn, Gat, None };

const char* to_string(InitKind k);
const char* to_string(AttentionKind k);
const char* to_string(AggregationKind k);
InitKind parse_init(const std::string& s);
AttentionKind parse_attention(const std::string& s);
AggregationKind parse_aggregation(const std::string& s);

/// One cell of the model family. The default triple is the full model; every
/// other combination swaps exactly one ingredient, which is how the ablation
/// grid is spanned. All combinations are constructible and trainable.
struct VariantConfig {
    InitKind init = InitKind::Llm;
    AttentionKind attention = AttentionKind::Dynamic;
    AggregationKind aggregation = AggregationKind::Simplified;

    bool operator==(const VariantConfig&) const = default;
    std::string name() const;  // "llm+dynamic+simplified"
};

/// Inverse of VariantConfig::name.
VariantConfig parse_variant(const std::string& name);

/// Parameter registry for a variant. For the default triple this registers
/// the same names in the same draw order as default_params, so the result is
/// bit-identical under the same seed.
ModelParams variant_params(const HTGraph& g, const ModelConfig& cfg, const VariantConfig& v,
                           std::uint64_t seed);

/// Initial coefficients per init kind. Llm delegates to the similarity-seeded
/// path (differentiable through llm.WQ/WK); random draws uniforms from `seed`
/// and normalizes per type; average is uniform over R(v); zero leaves the
/// pre-softmax state at zero so the first fused weights come entirely from
/// the first scorer step.
InitCoefficients variant_init(Tape& tape, const HTGraph& g, const ModelParams& params,
                              const std::map<std::string, TypeEmbedding>& embeddings,
                              InitKind kind, std::uint64_t seed);

/// Stateless scorer: one affine map per (layer, absolute snapshot), shared
/// across relations and types. Coefficients at time t cannot depend on data
/// at any other time; the per-snapshot parameters grow with the number of
/// snapshots.
class ProjectedScorer : public AttentionScorer {
public:
    explicit ProjectedScorer(const ModelParams& params) : params_(params) {}
    void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g, const InitCoefficients& e0,
                     std::size_t heads, std::size_t t0) override;
    Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                 std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) override;

private:
    const ModelParams& params_;
    std::size_t t0_ = 0;
};

/// Causal dot-product attention per (type, relation) chain: queries and keys
/// come from the per-snapshot mean representation, values are the
/// per-snapshot scores, and each step attends over all steps seen so far.
class SelfAttentionScorer : public AttentionScorer {
public:
    explicit SelfAttentionScorer(const ModelParams& params) : params_(params) {}
    void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g, const InitCoefficients& e0,
                     std::size_t heads, std::size_t t0) override;
    Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                 std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) override;

private:
    const ModelParams& params_;
    std::vector<std::vector<std::vector<Tensor>>> keys_;    // [type][rel_pos][step]
    std::vector<std::vector<std::vector<Tensor>>> scores_;  // [type][rel_pos][step]
};

/// Convex gate between the carried coefficients and a fresh score:
/// e^t = g ⊙ e^{t-1} + (1 − g) ⊙ s^t with g = sigmoid(affine(H^t)). A gate
/// saturated at 1 therefore carries e⁰ through unchanged.
class GatedScorer : public AttentionScorer {
public:
    explicit GatedScorer(const ModelParams& params) : params_(params) {}
    void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g, const InitCoefficients& e0,
                     std::size_t heads, std::size_t t0) override;
    Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                 std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) override;

private:
    const ModelParams& params_;
    const HTGraph* graph_ = nullptr;
    std::vector<std::vector<Tensor>> state_;  // [type][rel_pos]
};

/// Standard LSTM cell in place of the gated recurrent cell; the hidden state
/// serves as the coefficient matrix, the cell state starts at zero.
class LstmScorer : public AttentionScorer {
public:
    explicit LstmScorer(const ModelParams& params) : params_(params) {}
    void begin_layer(Tape& tape, std::size_t layer, const HTGraph& g, const InitCoefficients& e0,
                     std::size_t heads, std::size_t t0) override;
    Tensor score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t type,
                 std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) override;

private:
    const ModelParams& params_;
    const HTGraph* graph_ = nullptr;
    std::vector<std::vector<Tensor>> hidden_;  // [type][rel_pos]
    std::vector<std::vector<Tensor>> cell_;    // [type][rel_pos]
};

/// Graph-convolution aggregation: ELU(Â · H_src W) with a learned
/// per-(layer, relation) transform before the normalized sparse mix.
class GcnAggregator : public Aggregator {
public:
    explicit GcnAggregator(const ModelParams& params) : params_(params) {}
    Tensor aggregate(Tape& tape, const HTGraph& g, std::size_t layer, std::size_t rel_index,
                     std::size_t t, const Tensor& h_src, const Tensor& h_dst) override;

private:
    const ModelParams& params_;
    std::map<std::pair<std::size_t, std::size_t>, SparseMatrix> cache_;
};

/// Edge-attention aggregation: per-edge scores
/// LeakyReLU(a_srcᵀ W h_src + a_dstᵀ W h_dst), softmax over each
/// destination's in-edges, then a weighted sum of W h_src. There is no
/// output nonlinearity, so a single neighbor passes W·h through exactly;
/// destinations with no in-edges keep a zero row.
class GatAggregator : public Aggregator {
public:
    explicit GatAggregator(const ModelParams& params) : params_(params) {}
    Tensor aggregate(Tape& tape, const HTGraph& g, std::size_t layer, std::size_t rel_index,
                     std::size_t t, const Tensor& h_src, const Tensor& h_dst) override;

private:
    const ModelParams& params_;
    std::map<std::pair<std::size_t, std::size_t>, EdgeList> edges_;
};

/// No neighborhood mixing: every relation contributes ELU of the
/// destination's own representation, so relations differ only through their
/// attention weights.
class NoneAggregator : public Aggregator {
public:
    Tensor aggregate(Tape& tape, const HTGraph& g, std::size_t layer, std::size_t rel_index,
                     std::size_t t, const Tensor& h_src, const Tensor& h_dst) override;
};

/// Scorer for an attention kind, bound to a long-lived parameter registry.
std::unique_ptr<AttentionScorer> make_scorer(AttentionKind kind, const ModelParams& params);
/// Aggregator for an aggregation kind. The returned object caches per-
/// (relation, snapshot) structures, so reuse one instance across epochs.
std::unique_ptr<Aggregator> make_aggregator(AggregationKind kind, const ModelParams& params);

/// Parameters of the decoupled baseline: per-type projections, one static
/// scorer per (layer, absolute snapshot) — which is what makes the count grow
/// linearly with the number of snapshots — the temporal attention maps, one
/// projection per future step, and the shared head.
ModelParams decoupled_params(const HTGraph& g, const ModelConfig& cfg, std::uint64_t seed);

/// Decoupled spatio-temporal baseline: per-snapshot relation attention with
/// stateless per-snapshot scorers, then causal dot-product self-attention
/// over the window (every position attends over its prefix — quadratic in
/// the window by construction), mean-pooled, projected per future step, and
/// passed through the shared head. With a single-snapshot window the
/// temporal module degenerates to a linear map of that snapshot.
ForwardResult decoupled_forward(Tape& tape, const HTGraph& g, const ModelParams& params,
                                const ModelConfig& cfg, std::size_t target_type,
                                const ForwardOptions& opt);

}  // namespace htgl

#include "htgl/variants.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "htgl/rng.hpp"

namespace htgl {

const char* to_string(InitKind k) {
    switch (k) {
        case InitKind::Llm: return "llm";
        case InitKind::Random: return "random";
        case InitKind::Average: return "average";
        case InitKind::Zero: return "zero";
    }
    throw std::invalid_argument("unknown init kind");
}

const char* to_string(AttentionKind k) {
    switch (k) {
        case AttentionKind::Dynamic: return "dynamic";
        case AttentionKind::Projected: return "projected";
        case AttentionKind::SelfAttention: return "self";
        case AttentionKind::Gated: return "gated";
        case AttentionKind::Lstm: return "lstm";
    }
    throw std::invalid_argument("unknown attention kind");
}

const char* to_string(AggregationKind k) {
    switch (k) {
        case AggregationKind::Simplified: return "simplified";
        case AggregationKind::Gcn: return "gcn";
        case AggregationKind::Gat: return "gat";
        case AggregationKind::None: return "none";
    }
    throw std::invalid_argument("unknown aggregation kind");
}

InitKind parse_init(const std::string& s) {
    if (s == "llm") return InitKind::Llm;
    if (s == "random") return InitKind::Random;
    if (s == "average") return InitKind::Average;
    if (s == "zero") return InitKind::Zero;
    throw std::invalid_argument("unknown init kind '" + s + "'");
}

AttentionKind parse_attention(const std::string& s) {
    if (s == "dynamic") return AttentionKind::Dynamic;
    if (s == "projected") return AttentionKind::Projected;
    if (s == "self") return AttentionKind::SelfAttention;
    if (s == "gated") return AttentionKind::Gated;
    if (s == "lstm") return AttentionKind::Lstm;
    throw std::invalid_argument("unknown attention kind '" + s + "'");
}

AggregationKind parse_aggregation(const std::string& s) {
    if (s == "simplified") return AggregationKind::Simplified;
    if (s == "gcn") return AggregationKind::Gcn;
    if (s == "gat") return AggregationKind::Gat;
    if (s == "none") return AggregationKind::None;
    throw std::invalid_argument("unknown aggregation kind '" + s + "'");
}

std::string VariantConfig::name() const {
    return std::string(to_string(init)) + "+" + to_string(attention) + "+" +
           to_string(aggregation);
}

VariantConfig parse_variant(const std::string& name) {
    const auto a = name.find('+');
    const auto b = name.find('+', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) {
        throw std::invalid_argument("variant '" + name +
                                    "' is not of the form init+attention+aggregation");
    }
    VariantConfig v;
    v.init = parse_init(name.substr(0, a));
    v.attention = parse_attention(name.substr(a + 1, b - a - 1));
    v.aggregation = parse_aggregation(name.substr(b + 1));
    return v;
}

namespace {

void add_gru_block(ModelParams& p, const HTGraph& g, const ModelConfig& cfg, std::size_t layer) {
    const std::size_t d = cfg.dim, k = cfg.heads;
    for (const auto& rt : g.relation_types) {
        const std::string base = "gru." + std::to_string(layer) + "." + rt.name + ".";
        for (const char* gate : {"z", "r", "h"}) {
            p.add(base + "W" + gate, {d, k}, d);
            p.add(base + "U" + gate, {k, k}, k);
            p.add(base + "b" + gate, {k}, d);
        }
    }
}

void add_projected_block(ModelParams& p, const HTGraph& g, const ModelConfig& cfg,
                         std::size_t layer) {
    const std::size_t d = cfg.dim, k = cfg.heads;
    for (std::size_t t = 0; t < g.T(); ++t) {
        const std::string base = "attn." + std::to_string(layer) + "." + std::to_string(t) + ".";
        p.add(base + "W", {d, k}, d);
        p.add(base + "b", {k}, d);
    }
}

LstmParams lstm_block(const ModelParams& p, std::size_t layer, const std::string& relation) {
    const std::string base = "lstm." + std::to_string(layer) + "." + relation + ".";
    return LstmParams{p.at(base + "Wi"), p.at(base + "Ui"), p.at(base + "bi"),
                      p.at(base + "Wf"), p.at(base + "Uf"), p.at(base + "bf"),
                      p.at(base + "Wo"), p.at(base + "Uo"), p.at(base + "bo"),
                      p.at(base + "Wg"), p.at(base + "Ug"), p.at(base + "bg")};
}

void add_head_block(ModelParams& p, const ModelConfig& cfg) {
    const std::size_t d = cfg.dim;
    p.add("head.1.W", {d, d}, d);
    p.add("head.1.b", {d}, d);
    p.add("head.2.W", {d, cfg.head_width()}, d);
    p.add("head.2.b", {cfg.head_width()}, d);
}

/// Per-chain state seeded from the initial coefficients, one broadcast
/// per (type, inbound relation); shared by every stateful scorer.
std::vector<std::vector<Tensor>> seed_state(Tape& tape, const HTGraph& g,
                                            const InitCoefficients& e0, std::size_t heads) {
    std::vector<std::vector<Tensor>> state(g.node_types.size());
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        const auto rels = g.relations_into(v);
        if (e0.e0[v].size() != rels.size()) {
            throw std::invalid_argument("initial coefficients for type '" + g.node_types[v].name +
                                        "' cover " + std::to_string(e0.e0[v].size()) +
                                        " relations, graph has " + std::to_string(rels.size()));
        }
        for (std::size_t p = 0; p < rels.size(); ++p) {
            state[v].push_back(tape.broadcast_scalar(tape.select(e0.e0[v], p),
                                                     g.node_types[v].count, heads));
        }
    }
    return state;
}

}  // namespace

ModelParams variant_params(const HTGraph& g, const ModelConfig& cfg, const VariantConfig& v,
                           std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.dim, k = cfg.heads;
    ModelParams p(seed);
    for (const auto& nt : g.node_types) {
        p.add("proj." + nt.name + ".W", {nt.feature_dim, d}, nt.feature_dim);
        p.add("proj." + nt.name + ".b", {d}, nt.feature_dim);
    }
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        switch (v.attention) {
            case AttentionKind::Dynamic:
                add_gru_block(p, g, cfg, layer);
                break;
            case AttentionKind::Projected:
                add_projected_block(p, g, cfg, layer);
                break;
            case AttentionKind::SelfAttention: {
                const std::string base = "attn.self." + std::to_string(layer) + ".";
                p.add(base + "Wq", {d, d}, d);
                p.add(base + "Wk", {d, d}, d);
                p.add(base + "Ws", {d, k}, d);
                p.add(base + "bs", {k}, d);
                break;
            }
            case AttentionKind::Gated:
                for (const auto& rt : g.relation_types) {
                    const std::string base = "gate." + std::to_string(layer) + "." + rt.name + ".";
                    p.add(base + "Wg", {d, k}, d);
                    p.add(base + "bg", {k}, d);
                    p.add(base + "Ws", {d, k}, d);
                    p.add(base + "bs", {k}, d);
                }
                break;
            case AttentionKind::Lstm:
                for (const auto& rt : g.relation_types) {
                    const std::string base = "lstm." + std::to_string(layer) + "." + rt.name + ".";
                    for (const char* gate : {"i", "f", "o", "g"}) {
                        p.add(base + "W" + gate, {d, k}, d);
                        p.add(base + "U" + gate, {k, k}, k);
                        p.add(base + "b" + gate, {k}, d);
                    }
                }
                break;
        }
    }
    if (v.aggregation == AggregationKind::Gcn || v.aggregation == AggregationKind::Gat) {
        for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
            for (const auto& rt : g.relation_types) {
                const std::string base = "agg." + std::to_string(layer) + "." + rt.name + ".";
                p.add(base + "W", {d, d}, d);
                if (v.aggregation == AggregationKind::Gat) {
                    p.add(base + "a_src", {d, 1}, d);
                    p.add(base + "a_dst", {d, 1}, d);
                }
            }
        }
    }
    if (v.init == InitKind::Llm) {
        p.add("llm.WQ", {cfg.llm_dim, cfg.sim_width()}, cfg.llm_dim);
        p.add("llm.WK", {cfg.llm_dim, cfg.sim_width()}, cfg.llm_dim);
    }
    p.add("temporal.W", {cfg.window, cfg.horizon}, cfg.window);
    p.add("temporal.b", {cfg.horizon}, cfg.window);
    add_head_block(p, cfg);
    return p;
}

InitCoefficients variant_init(Tape& tape, const HTGraph& g, const ModelParams& params,
                              const std::map<std::string, TypeEmbedding>& embeddings,
                              InitKind kind, std::uint64_t seed) {
    if (kind == InitKind::Llm) {
        return init_attention(tape, g, embeddings, params.at("llm.WQ"), params.at("llm.WK"));
    }
    InitCoefficients out;
    std::mt19937_64 gen(seed);
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        const std::size_t n_rel = g.relations_into(v).size();
        Tensor e = Tensor::zeros({n_rel});
        switch (kind) {
            case InitKind::Random: {
                for (double& x : e.value()) x = rng::unit(gen);
                double mx = 0.0;
                for (double x : e.value()) mx = std::max(mx, x);
                double total = 0.0;
                for (double& x : e.value()) total += x = std::exp(x - mx);
                for (double& x : e.value()) x /= total;
                break;
            }
            case InitKind::Average:
                for (double& x : e.value()) x = 1.0 / double(n_rel);
                break;
            case InitKind::Zero:
                break;
            case InitKind::Llm:
                break;  // handled above
        }
        out.e0.push_back(e);
    }
    return out;
}

void ProjectedScorer::begin_layer(Tape& /*tape*/, std::size_t /*layer*/, const HTGraph& /*g*/,
                                  const InitCoefficients& /*e0*/, std::size_t /*heads*/,
                                  std::size_t t0) {
    t0_ = t0;
}

Tensor ProjectedScorer::score(Tape& tape, std::size_t layer, std::size_t ti, std::size_t /*type*/,
                              std::size_t /*rel_pos*/, std::size_t /*rel_index*/,
                              const Tensor& h_rel) {
    const std::string base =
        "attn." + std::to_string(layer) + "." + std::to_string(t0_ + ti) + ".";
    return tape.add_bias(tape.matmul(h_rel, params_.at(base + "W")), params_.at(base + "b"));
}

void SelfAttentionScorer::begin_layer(Tape& /*tape*/, std::size_t /*layer*/, const HTGraph& g,
                                      const InitCoefficients& /*e0*/, std::size_t /*heads*/,
                                      std::size_t /*t0*/) {
    keys_.assign(g.node_types.size(), {});
    scores_.assign(g.node_types.size(), {});
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        keys_[v].resize(g.relations_into(v).size());
        scores_[v].resize(g.relations_into(v).size());
    }
}

Tensor SelfAttentionScorer::score(Tape& tape, std::size_t layer, std::size_t /*ti*/,
                                  std::size_t type, std::size_t rel_pos,
                                  std::size_t /*rel_index*/, const Tensor& h_rel) {
    const std::string base = "attn.self." + std::to_string(layer) + ".";
    const std::size_t n = h_rel.rows(), d = h_rel.cols();
    Tensor ones = Tensor::full({1, n}, 1.0);
    Tensor mean = tape.scale_add(tape.matmul(ones, h_rel), 1.0 / double(n), 0.0);
    Tensor q = tape.matmul(mean, params_.at(base + "Wq"));
    keys_[type][rel_pos].push_back(tape.matmul(mean, params_.at(base + "Wk")));
    scores_[type][rel_pos].push_back(
        tape.add_bias(tape.matmul(h_rel, params_.at(base + "Ws")), params_.at(base + "bs")));

    const double scale = 1.0 / std::sqrt(double(d));
    std::vector<Tensor> logits;
    for (const Tensor& key : keys_[type][rel_pos]) {
        logits.push_back(tape.scale_add(tape.sum_all(tape.mul(q, key)), scale, 0.0));
    }
    Tensor w = tape.softmax(tape.stack_scalars(logits));
    return tape.weighted_sum(scores_[type][rel_pos], w);
}

void GatedScorer::begin_layer(Tape& tape, std::size_t /*layer*/, const HTGraph& g,
                              const InitCoefficients& e0, std::size_t heads, std::size_t /*t0*/) {
    graph_ = &g;
    state_ = seed_state(tape, g, e0, heads);
}

Tensor GatedScorer::score(Tape& tape, std::size_t layer, std::size_t /*ti*/, std::size_t type,
                          std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) {
    const std::string base =
        "gate." + std::to_string(layer) + "." + graph_->relation_types[rel_index].name + ".";
    Tensor gate = tape.activation(
        Activation::Sigmoid,
        tape.add_bias(tape.matmul(h_rel, params_.at(base + "Wg")), params_.at(base + "bg")));
    Tensor fresh =
        tape.add_bias(tape.matmul(h_rel, params_.at(base + "Ws")), params_.at(base + "bs"));
    Tensor e = tape.add(tape.mul(gate, state_[type][rel_pos]),
                        tape.sub(fresh, tape.mul(gate, fresh)));
    state_[type][rel_pos] = e;
    return e;
}

void LstmScorer::begin_layer(Tape& tape, std::size_t /*layer*/, const HTGraph& g,
                             const InitCoefficients& e0, std::size_t heads, std::size_t /*t0*/) {
    graph_ = &g;
    hidden_ = seed_state(tape, g, e0, heads);
    cell_.assign(g.node_types.size(), {});
    for (std::size_t v = 0; v < g.node_types.size(); ++v) {
        cell_[v].assign(g.relations_into(v).size(),
                        Tensor::zeros({g.node_types[v].count, heads}));
    }
}

Tensor LstmScorer::score(Tape& tape, std::size_t layer, std::size_t /*ti*/, std::size_t type,
                         std::size_t rel_pos, std::size_t rel_index, const Tensor& h_rel) {
    auto [h, c] = tape.lstm_cell(
        h_rel, hidden_[type][rel_pos], cell_[type][rel_pos],
        lstm_block(params_, layer, graph_->relation_types[rel_index].name));
    hidden_[type][rel_pos] = h;
    cell_[type][rel_pos] = c;
    return h;
}

Tensor GcnAggregator::aggregate(Tape& tape, const HTGraph& g, std::size_t layer,
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
    Tensor W = params_.at("agg." + std::to_string(layer) + "." +
                          g.relation_types[rel_index].name + ".W");
    return tape.activation(Activation::Elu, tape.spmm(it->second, tape.matmul(h_src, W)));
}

Tensor GatAggregator::aggregate(Tape& tape, const HTGraph& g, std::size_t layer,
                                std::size_t rel_index, std::size_t t, const Tensor& h_src,
                                const Tensor& h_dst) {
    const auto key = std::make_pair(rel_index, t);
    auto it = edges_.find(key);
    if (it == edges_.end()) {
        const EdgeList& raw = g.snapshots[t].edges[rel_index];
        const std::set<std::pair<std::uint32_t, std::uint32_t>> uniq(raw.begin(), raw.end());
        it = edges_.emplace(key, EdgeList(uniq.begin(), uniq.end())).first;
    }
    const std::string base =
        "agg." + std::to_string(layer) + "." + g.relation_types[rel_index].name + ".";
    Tensor W = params_.at(base + "W");
    Tensor hw_src = tape.matmul(h_src, W);
    Tensor hw_dst = tape.matmul(h_dst, W);
    Tensor s_src = tape.matmul(hw_src, params_.at(base + "a_src"));
    Tensor s_dst = tape.matmul(hw_dst, params_.at(base + "a_dst"));
    Tensor scores = tape.activation(Activation::LeakyRelu,
                                    tape.edge_scores(it->second, s_src, s_dst));
    Tensor coef = tape.edge_softmax(it->second, scores, h_dst.rows());
    return tape.edge_weighted_sum(it->second, coef, hw_src, h_dst.rows());
}

Tensor NoneAggregator::aggregate(Tape& tape, const HTGraph& /*g*/, std::size_t /*layer*/,
                                 std::size_t /*rel_index*/, std::size_t /*t*/,
                                 const Tensor& /*h_src*/, const Tensor& h_dst) {
    return tape.activation(Activation::Elu, h_dst);
}

std::unique_ptr<AttentionScorer> make_scorer(AttentionKind kind, const ModelParams& params) {
    switch (kind) {
        case AttentionKind::Dynamic: return std::make_unique<DynamicGruScorer>(params);
        case AttentionKind::Projected: return std::make_unique<ProjectedScorer>(params);
        case AttentionKind::SelfAttention: return std::make_unique<SelfAttentionScorer>(params);
        case AttentionKind::Gated: return std::make_unique<GatedScorer>(params);
        case AttentionKind::Lstm: return std::make_unique<LstmScorer>(params);
    }
    throw std::invalid_argument("unknown attention kind");
}

std::unique_ptr<Aggregator> make_aggregator(AggregationKind kind, const ModelParams& params) {
    switch (kind) {
        case AggregationKind::Simplified: return std::make_unique<SimplifiedAggregator>();
        case AggregationKind::Gcn: return std::make_unique<GcnAggregator>(params);
        case AggregationKind::Gat: return std::make_unique<GatAggregator>(params);
        case AggregationKind::None: return std::make_unique<NoneAggregator>();
    }
    throw std::invalid_argument("unknown aggregation kind");
}

ModelParams decoupled_params(const HTGraph& g, const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    ModelParams p(seed);
    for (const auto& nt : g.node_types) {
        p.add("proj." + nt.name + ".W", {nt.feature_dim, d}, nt.feature_dim);
        p.add("proj." + nt.name + ".b", {d}, nt.feature_dim);
    }
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        add_projected_block(p, g, cfg, layer);
    }
    p.add("temporal.Wq", {d, d}, d);
    p.add("temporal.Wk", {d, d}, d);
    p.add("temporal.Wv", {d, d}, d);
    for (std::size_t s = 0; s < cfg.horizon; ++s) {
        const std::string base = "step." + std::to_string(s) + ".";
        p.add(base + "W", {d, d}, d);
        p.add(base + "b", {d}, d);
    }
    add_head_block(p, cfg);
    return p;
}

ForwardResult decoupled_forward(Tape& tape, const HTGraph& g, const ModelParams& params,
                                const ModelConfig& cfg, std::size_t target_type,
                                const ForwardOptions& opt) {
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

    SimplifiedAggregator aggregator;
    ProjectedScorer scorer(params);
    const std::size_t n_types = g.node_types.size();
    const std::size_t t0 = opt.window_end + 1 - cfg.window;

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
    InitCoefficients unused;
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        auto& layer_trace = res.trace.alpha[layer - 1];
        layer_trace.assign(cfg.window, std::vector<std::vector<double>>(n_types));
        scorer.begin_layer(tape, layer, g, unused, cfg.heads, t0);
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
                    Tensor h_rel = aggregator.aggregate(tape, g, layer, r, t, inputs[src][ti],
                                                        inputs[v][ti]);
                    h_set.push_back(h_rel);
                    e_set.push_back(scorer.score(tape, layer, ti, v, p, r, h_rel));
                }
                auto [alpha, fused] = fuse_relations(tape, e_set, h_set, opt.coeff_shift);
                layer_trace[ti][v] = alpha.value();
                next[v][ti] = fused;
            }
        }
        inputs = std::move(next);
    }

    // causal self-attention over the window, one sequence per target node;
    // position ti attends over positions 0..ti, outputs are mean pooled
    res.fused = inputs[target_type];
    const std::vector<Tensor>& seq = res.fused;
    Tensor Wq = params.at("temporal.Wq");
    Tensor Wk = params.at("temporal.Wk");
    Tensor Wv = params.at("temporal.Wv");
    std::vector<Tensor> q, key, val;
    for (std::size_t ti = 0; ti < cfg.window; ++ti) {
        q.push_back(tape.matmul(seq[ti], Wq));
        key.push_back(tape.matmul(seq[ti], Wk));
        val.push_back(tape.matmul(seq[ti], Wv));
    }
    const double scale = 1.0 / std::sqrt(double(cfg.dim));
    Tensor col = Tensor::full({cfg.dim, 1}, 1.0);
    Tensor pooled;
    for (std::size_t ti = 0; ti < cfg.window; ++ti) {
        std::vector<Tensor> logits, values;
        for (std::size_t u = 0; u <= ti; ++u) {
            logits.push_back(tape.scale_add(tape.matmul(tape.mul(q[ti], key[u]), col), scale, 0.0));
            values.push_back(val[u]);
        }
        Tensor out = tape.attention_mix(logits, values);
        pooled = ti == 0 ? out : tape.add(pooled, out);
    }
    pooled = tape.scale_add(pooled, 1.0 / double(cfg.window), 0.0);

    for (std::size_t s = 0; s < cfg.horizon; ++s) {
        const std::string base = "step." + std::to_string(s) + ".";
        Tensor z = tape.add_bias(tape.matmul(pooled, params.at(base + "W")), params.at(base + "b"));
        res.projected.push_back(z);
        res.predictions.push_back(mlp_head(tape, z, params.at("head.1.W"), params.at("head.1.b"),
                                           params.at("head.2.W"), params.at("head.2.b")));
    }
    return res;
}

}  // namespace htgl

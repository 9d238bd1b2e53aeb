#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "baseline_oracle.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "htgl/gradcheck.hpp"
#include "htgl/losses.hpp"
#include "htgl/synth.hpp"
#include "htgl/train.hpp"
#include "htgl/variants.hpp"

using htgl::AggregationKind;
using htgl::AttentionKind;
using htgl::ForwardOptions;
using htgl::ForwardResult;
using htgl::HTGraph;
using htgl::InitCoefficients;
using htgl::InitKind;
using htgl::ModelConfig;
using htgl::ModelParams;
using htgl::NodePairs;
using htgl::Tape;
using htgl::Tensor;
using htgl::VariantConfig;
using fixtures::toy_config;
using fixtures::toy_embeddings;
using fixtures::toy_graph;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& gen, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.value()) v = lo + (hi - lo) * htgl::rng::unit(gen);
    return t;
}

oracle::Mat to_mat(const Tensor& t) {
    oracle::Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.value()[r * t.cols() + c];
    return m;
}

oracle::GraphView to_view(const HTGraph& g) {
    oracle::GraphView view;
    for (const auto& nt : g.node_types) view.counts.push_back(nt.count);
    for (const auto& rt : g.relation_types)
        view.relations.push_back({rt.name, g.type_index(rt.src_type), g.type_index(rt.dst_type)});
    for (const auto& snap : g.snapshots) {
        view.edges.push_back(snap.edges);
        std::vector<oracle::Mat> feats;
        for (const auto& x : snap.features) feats.push_back(to_mat(x));
        view.features.push_back(std::move(feats));
    }
    return view;
}

std::vector<VariantConfig> all_variants() {
    std::vector<VariantConfig> out;
    for (InitKind i : {InitKind::Llm, InitKind::Random, InitKind::Average, InitKind::Zero})
        for (AttentionKind a : {AttentionKind::Dynamic, AttentionKind::Projected,
                                AttentionKind::SelfAttention, AttentionKind::Gated,
                                AttentionKind::Lstm})
            for (AggregationKind g : {AggregationKind::Simplified, AggregationKind::Gcn,
                                      AggregationKind::Gat, AggregationKind::None})
                out.push_back({i, a, g});
    return out;
}

/// Sets every registered tensor whose name starts with `prefix` and ends with
/// `suffix` to a constant.
void fill_params(const ModelParams& p, const std::string& prefix, const std::string& suffix,
                 double value) {
    for (const auto& [name, t] : p.entries()) {
        if (name.rfind(prefix, 0) != 0) continue;
        if (name.size() < suffix.size() ||
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        for (double& x : t.value()) x = value;
    }
}

/// Small two-regime graph: community signal sits in one side type's features
/// before the switch and in the other's after it.
htgl::SynthOutput regime_fixture(std::uint64_t seed = 21) {
    htgl::SynthConfig sc;
    sc.kind = htgl::SynthKind::RegimeSwitch;
    sc.seed = seed;
    sc.T = 4;
    sc.switch_at = 2;
    sc.n_target = 12;
    sc.n_side = 16;
    sc.regime_communities = 3;
    htgl::SynthOutput out = htgl::generate_synthetic(sc);
    htgl::add_self_relation(out.graph);
    return out;
}

}  // namespace

TEST_CASE("variant names round-trip and malformed names are rejected") {
    CHECK(VariantConfig{}.name() == "llm+dynamic+simplified");
    for (const VariantConfig& v : all_variants()) {
        CHECK(htgl::parse_variant(v.name()) == v);
    }
    CHECK_THROWS_AS(htgl::parse_variant("llm"), std::invalid_argument);
    CHECK_THROWS_AS(htgl::parse_variant("llm+dynamic"), std::invalid_argument);
    CHECK_THROWS_AS(htgl::parse_variant("foo+dynamic+simplified"), std::invalid_argument);
    CHECK_THROWS_AS(htgl::parse_variant("llm+foo+simplified"), std::invalid_argument);
    CHECK_THROWS_AS(htgl::parse_variant("llm+dynamic+foo"), std::invalid_argument);
}

TEST_CASE("default variant registry is bit-identical to the primary registry") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const ModelParams a = htgl::default_params(g, cfg, 31);
    const ModelParams b = htgl::variant_params(g, cfg, VariantConfig{}, 31);
    REQUIRE(a.entries().size() == b.entries().size());
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        CHECK(a.entries()[i].first == b.entries()[i].first);
        CHECK(a.entries()[i].second.shape() == b.entries()[i].second.shape());
        CHECK(a.entries()[i].second.value() == b.entries()[i].second.value());
    }
}

TEST_CASE("initial coefficient variants: uniform, zero, seeded random, similarity") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const auto emb = toy_embeddings(g, cfg.llm_dim);
    const ModelParams params = htgl::variant_params(g, cfg, VariantConfig{}, 5);
    // alpha has three inbound relations (aa, ba, self.alpha), beta one
    REQUIRE(g.relations_into(0).size() == 3);
    REQUIRE(g.relations_into(1).size() == 1);

    Tape tape;
    const auto avg = htgl::variant_init(tape, g, params, emb, InitKind::Average, 1);
    CHECK(avg.e0[0].value() == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(avg.e0[1].value() == std::vector<double>{1.0});

    const auto zero = htgl::variant_init(tape, g, params, emb, InitKind::Zero, 1);
    CHECK(zero.e0[0].value() == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(zero.e0[1].value() == std::vector<double>{0.0});

    const auto r1 = htgl::variant_init(tape, g, params, emb, InitKind::Random, 5);
    const auto r2 = htgl::variant_init(tape, g, params, emb, InitKind::Random, 5);
    const auto r3 = htgl::variant_init(tape, g, params, emb, InitKind::Random, 6);
    CHECK(r1.e0[0].value() == r2.e0[0].value());
    CHECK(r1.e0[1].value() == r2.e0[1].value());
    CHECK(r1.e0[0].value() != r3.e0[0].value());
    double total = 0.0;
    for (double x : r1.e0[0].value()) {
        CHECK(x > 0.0);
        total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const auto sim = htgl::variant_init(tape, g, params, emb, InitKind::Llm, 1);
    Tape other;
    const auto direct =
        htgl::init_attention(other, g, emb, params.at("llm.WQ"), params.at("llm.WK"));
    for (std::size_t v = 0; v < 2; ++v) CHECK(sim.e0[v].value() == direct.e0[v].value());
}

TEST_CASE("stateless relation attention ignores other snapshots, the recurrent one reacts") {
    const auto fixture = regime_fixture();
    const HTGraph& g = fixture.graph;
    ModelConfig cfg = toy_config();
    cfg.window = 3;
    const auto emb = toy_embeddings(g, cfg.llm_dim);

    // tensors share buffers on copy, so build the perturbed twin from scratch
    const auto fixture2 = regime_fixture();
    HTGraph perturbed = fixture2.graph;
    for (auto& snap_feature : perturbed.snapshots[1].features)
        for (double& x : snap_feature.value()) x += 0.7;

    for (AttentionKind kind : {AttentionKind::Projected, AttentionKind::Dynamic}) {
        const VariantConfig v{InitKind::Llm, kind, AggregationKind::Simplified};
        const ModelParams params = htgl::variant_params(g, cfg, v, 23);
        auto run = [&](const HTGraph& graph) {
            Tape tape;
            auto scorer = htgl::make_scorer(kind, params);
            auto agg = htgl::make_aggregator(AggregationKind::Simplified, params);
            InitCoefficients e0 = htgl::variant_init(tape, graph, params, emb, v.init, 1);
            ForwardOptions fo;
            fo.window_end = 2;
            return htgl::forward(tape, graph, params, cfg, 0, e0, fo, scorer.get(), agg.get());
        };
        const ForwardResult base = run(g);
        const ForwardResult moved = run(perturbed);

        // sanity: the perturbation is visible where it was injected
        double at_injection = 0.0;
        for (std::size_t v2 = 0; v2 < g.node_types.size(); ++v2)
            for (std::size_t p = 0; p < base.trace.alpha[0][1][v2].size(); ++p)
                at_injection += std::abs(base.trace.alpha[0][1][v2][p] -
                                         moved.trace.alpha[0][1][v2][p]);
        CHECK(at_injection > 1e-6);

        double after = 0.0;
        for (std::size_t layer = 0; layer < cfg.layers; ++layer)
            for (std::size_t v2 = 0; v2 < g.node_types.size(); ++v2)
                for (std::size_t p = 0; p < base.trace.alpha[layer][2][v2].size(); ++p)
                    after += std::abs(base.trace.alpha[layer][2][v2][p] -
                                      moved.trace.alpha[layer][2][v2][p]);
        if (kind == AttentionKind::Projected) {
            for (std::size_t layer = 0; layer < cfg.layers; ++layer)
                for (std::size_t v2 = 0; v2 < g.node_types.size(); ++v2)
                    CHECK(base.trace.alpha[layer][2][v2] == moved.trace.alpha[layer][2][v2]);
        } else {
            CHECK(after > 1e-6);
        }
    }
}

TEST_CASE("self-attention over one step returns exactly that step's score") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const VariantConfig v{InitKind::Average, AttentionKind::SelfAttention,
                          AggregationKind::Simplified};
    const ModelParams params = htgl::variant_params(g, cfg, v, 41);
    const auto emb = toy_embeddings(g, cfg.llm_dim);

    Tape tape;
    auto scorer = htgl::make_scorer(AttentionKind::SelfAttention, params);
    InitCoefficients e0 = htgl::variant_init(tape, g, params, emb, v.init, 1);
    scorer->begin_layer(tape, 1, g, e0, cfg.heads, 0);

    std::mt19937_64 gen(7);
    Tensor h = random_tensor({5, cfg.dim}, gen);
    Tensor e = scorer->score(tape, 1, 0, 0, 0, 0, h);
    Tensor expected = tape.add_bias(tape.matmul(h, params.at("attn.self.1.Ws")),
                                    params.at("attn.self.1.bs"));
    CHECK(e.value() == expected.value());

    // a second step mixes the two scores convexly, entry by entry
    Tensor h2 = random_tensor({5, cfg.dim}, gen);
    Tensor e2 = scorer->score(tape, 1, 1, 0, 0, 0, h2);
    Tensor s2 = tape.add_bias(tape.matmul(h2, params.at("attn.self.1.Ws")),
                              params.at("attn.self.1.bs"));
    for (std::size_t i = 0; i < e2.size(); ++i) {
        const double lo = std::min(expected.value()[i], s2.value()[i]);
        const double hi = std::max(expected.value()[i], s2.value()[i]);
        CHECK(e2.value()[i] >= lo - 1e-12);
        CHECK(e2.value()[i] <= hi + 1e-12);
    }
}

TEST_CASE("gate saturated at one carries the initial coefficients unchanged") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const VariantConfig v{InitKind::Llm, AttentionKind::Gated, AggregationKind::Simplified};
    const ModelParams params = htgl::variant_params(g, cfg, v, 43);
    const auto emb = toy_embeddings(g, cfg.llm_dim);
    fill_params(params, "gate.", ".Wg", 0.0);
    fill_params(params, "gate.", ".bg", 1000.0);  // sigmoid saturates to exactly 1

    Tape tape;
    auto scorer = htgl::make_scorer(AttentionKind::Gated, params);
    InitCoefficients e0 = htgl::variant_init(tape, g, params, emb, InitKind::Llm, 1);
    scorer->begin_layer(tape, 1, g, e0, cfg.heads, 0);

    std::mt19937_64 gen(11);
    for (std::size_t step = 0; step < 3; ++step) {
        Tensor h = random_tensor({5, cfg.dim}, gen);
        Tensor e = scorer->score(tape, 1, step, 0, 0, 0, h);
        for (double x : e.value()) CHECK(x == e0.e0[0].value()[0]);
    }

    // un-saturated gate: the coefficients move away from the start
    const ModelParams fresh = htgl::variant_params(g, cfg, v, 43);
    auto moving = htgl::make_scorer(AttentionKind::Gated, fresh);
    moving->begin_layer(tape, 1, g, e0, cfg.heads, 0);
    Tensor h = random_tensor({5, cfg.dim}, gen);
    Tensor e = moving->score(tape, 1, 0, 0, 0, 0, h);
    double drift = 0.0;
    for (double x : e.value()) drift += std::abs(x - e0.e0[0].value()[0]);
    CHECK(drift > 1e-8);
}

TEST_CASE("lstm scorer with zero parameters and zero start is a fixed point at zero") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const VariantConfig v{InitKind::Zero, AttentionKind::Lstm, AggregationKind::Simplified};
    const ModelParams params = htgl::variant_params(g, cfg, v, 47);
    const auto emb = toy_embeddings(g, cfg.llm_dim);
    fill_params(params, "lstm.", "", 0.0);  // every lstm weight and bias

    Tape tape;
    auto scorer = htgl::make_scorer(AttentionKind::Lstm, params);
    InitCoefficients e0 = htgl::variant_init(tape, g, params, emb, InitKind::Zero, 1);
    scorer->begin_layer(tape, 1, g, e0, cfg.heads, 0);

    std::mt19937_64 gen(13);
    for (std::size_t step = 0; step < 3; ++step) {
        Tensor h = random_tensor({5, cfg.dim}, gen);
        Tensor e = scorer->score(tape, 1, step, 0, 0, 0, h);
        for (double x : e.value()) CHECK(x == 0.0);
    }
}

TEST_CASE("learned-transform aggregation matches a dense scalar oracle") {
    const HTGraph g = toy_graph();
    const ModelConfig cfg = toy_config();
    const VariantConfig v{InitKind::Random, AttentionKind::Dynamic, AggregationKind::Gcn};
    const ModelParams params = htgl::variant_params(g, cfg, v, 53);
    auto agg = htgl::make_aggregator(AggregationKind::Gcn, params);

    std::mt19937_64 gen(17);
    for (std::size_t rel : {std::size_t(0), std::size_t(1)}) {  // aa and ba
        const auto& rt = g.relation_types[rel];
        const std::size_t n_src = g.node_types[g.type_index(rt.src_type)].count;
        const std::size_t n_dst = g.node_types[g.type_index(rt.dst_type)].count;
        Tensor h_src = random_tensor({n_src, cfg.dim}, gen);
        Tensor h_dst = random_tensor({n_dst, cfg.dim}, gen);
        Tape tape;
        Tensor out = agg->aggregate(tape, g, 1, rel, 0, h_src, h_dst);

        const oracle::Mat W = to_mat(params.at("agg.1." + rt.name + ".W"));
        const oracle::Mat a = oracle::o_adjacency(g.snapshots[0].edges[rel], n_src, n_dst,
                                                  rt.src_type == rt.dst_type);
        const oracle::Mat h = to_mat(h_src);
        for (std::size_t i = 0; i < n_dst; ++i)
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n_src; ++s) {
                    double hw = 0.0;
                    for (std::size_t d = 0; d < cfg.dim; ++d) hw += h[s][d] * W[d][j];
                    acc += a[i][s] * hw;
                }
                CHECK(std::abs(out.value()[i * cfg.dim + j] - oracle::o_elu(acc)) < 1e-12);
            }
    }
}

TEST_CASE("edge attention: singleton passthrough, symmetric pair, oracle, isolated rows") {
    HTGraph g;
    g.node_types.push_back({"x", 4, 2, "Plain nodes."});
    g.relation_types.push_back({"r", "x", "x"});
    htgl::Snapshot snap;
    snap.edges.push_back({{2, 0}});
    snap.features.push_back(Tensor::zeros({4, 2}));
    g.snapshots.push_back(snap);
    // second snapshot: two identical neighbors into node 0, nothing into 1
    htgl::Snapshot snap2 = snap;
    snap2.edges[0] = {{1, 0}, {3, 0}};
    g.snapshots.push_back(snap2);
    // third snapshot: the four-node case plus a duplicate edge
    htgl::Snapshot snap3 = snap;
    snap3.edges[0] = {{0, 1}, {2, 1}, {3, 1}, {1, 2}, {3, 2}, {0, 3}, {0, 3}};
    g.snapshots.push_back(snap3);
    g.validate();

    ModelConfig cfg = toy_config();
    cfg.dim = 3;
    const VariantConfig v{InitKind::Random, AttentionKind::Dynamic, AggregationKind::Gat};
    const ModelParams params = htgl::variant_params(g, cfg, v, 59);
    auto agg = htgl::make_aggregator(AggregationKind::Gat, params);
    const oracle::Mat W = to_mat(params.at("agg.1.r.W"));
    const std::vector<double> a_src = params.at("agg.1.r.a_src").value();
    const std::vector<double> a_dst = params.at("agg.1.r.a_dst").value();

    std::mt19937_64 gen(19);
    Tensor h = random_tensor({4, 3}, gen);
    auto hw = [&](std::size_t row, std::size_t col) {
        double acc = 0.0;
        for (std::size_t d = 0; d < 3; ++d) acc += h.value()[row * 3 + d] * W[d][col];
        return acc;
    };

    Tape tape;
    Tensor hwT = tape.matmul(h, params.at("agg.1.r.W"));
    Tensor single = agg->aggregate(tape, g, 1, 0, 0, h, h);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(single.value()[0 * 3 + j] == hwT.value()[2 * 3 + j]);  // weight exactly one
        CHECK(single.value()[1 * 3 + j] == 0.0);
        CHECK(single.value()[2 * 3 + j] == 0.0);
        CHECK(single.value()[3 * 3 + j] == 0.0);
    }

    Tensor twin_h = Tensor::from({4, 3}, h.value());  // independent buffer
    for (std::size_t d = 0; d < 3; ++d)
        twin_h.value()[3 * 3 + d] = twin_h.value()[1 * 3 + d];  // rows 1 and 3 identical
    Tensor twin_hw = tape.matmul(twin_h, params.at("agg.1.r.W"));
    Tensor pair = agg->aggregate(tape, g, 1, 0, 1, twin_h, twin_h);
    for (std::size_t j = 0; j < 3; ++j) {
        // halves of two bitwise-equal rows recombine exactly
        CHECK(pair.value()[0 * 3 + j] == twin_hw.value()[1 * 3 + j]);
    }

    // scripted edge-loop oracle on the four-node snapshot; node 0 has no
    // in-edges and must stay zero, the duplicated edge must count once
    Tensor dense = agg->aggregate(tape, g, 1, 0, 2, h, h);
    const std::set<std::pair<std::uint32_t, std::uint32_t>> edges(snap3.edges[0].begin(),
                                                                  snap3.edges[0].end());
    std::vector<double> escore;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> uniq(edges.begin(), edges.end());
    for (const auto& [s, d] : uniq) {
        double raw = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
            raw += hw(s, c) * a_src[c] + hw(d, c) * a_dst[c];
        escore.push_back(raw >= 0.0 ? raw : 0.01 * raw);
    }
    for (std::size_t dst = 0; dst < 4; ++dst) {
        std::vector<double> logits;
        std::vector<std::size_t> srcs;
        for (std::size_t e = 0; e < uniq.size(); ++e) {
            if (uniq[e].second == dst) {
                logits.push_back(escore[e]);
                srcs.push_back(uniq[e].first);
            }
        }
        if (logits.empty()) {
            for (std::size_t j = 0; j < 3; ++j) CHECK(dense.value()[dst * 3 + j] == 0.0);
            continue;
        }
        const std::vector<double> coef = oracle::o_softmax(logits);
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t e = 0; e < srcs.size(); ++e) acc += coef[e] * hw(srcs[e], j);
            CHECK(std::abs(dense.value()[dst * 3 + j] - acc) < 1e-10);
        }
    }
}

TEST_CASE("aggregation without neighbors keeps each node's own signal") {
    const HTGraph g = toy_graph();
    const ModelParams params = htgl::variant_params(g, toy_config(), VariantConfig{}, 61);
    auto agg = htgl::make_aggregator(AggregationKind::None, params);
    std::mt19937_64 gen(23);
    Tensor h_src = random_tensor({5, 4}, gen);
    Tensor h_dst = random_tensor({5, 4}, gen, -2.0, 2.0);
    Tape tape;
    Tensor out = agg->aggregate(tape, g, 1, 0, 0, h_src, h_dst);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.value()[i] == doctest::Approx(oracle::o_elu(h_dst.value()[i])).epsilon(1e-15));
}

TEST_CASE("missing per-snapshot scorer is reported by parameter name") {
    const HTGraph g = toy_graph();  // three snapshots: scorers 0..2 exist
    const ModelConfig cfg = toy_config();
    const VariantConfig v{InitKind::Average, AttentionKind::Projected,
                          AggregationKind::Simplified};
    const ModelParams params = htgl::variant_params(g, cfg, v, 67);
    auto scorer = htgl::make_scorer(AttentionKind::Projected, params);
    Tape tape;
    InitCoefficients e0;
    scorer->begin_layer(tape, 1, g, e0, cfg.heads, 2);
    std::mt19937_64 gen(29);
    Tensor h = random_tensor({5, cfg.dim}, gen);
    CHECK_NOTHROW(scorer->score(tape, 1, 0, 0, 0, 0, h));  // t = 2
    CHECK_THROWS_WITH_AS(scorer->score(tape, 1, 1, 0, 0, 0, h),  // t = 3: no scorer
                         doctest::Contains("attn.1.3"), std::invalid_argument);
}

TEST_CASE("every variant combination trains a step and has correct gradients") {
    const HTGraph g = toy_graph(7, 5);
    ModelConfig cfg = toy_config();
    const auto emb = toy_embeddings(g, cfg.llm_dim);

    htgl::TaskSpec task;
    task.kind = htgl::TaskKind::Link;
    task.target_relation = g.relation_index("aa");

    const NodePairs pos(g.snapshots[2].edges[0].begin(), g.snapshots[2].edges[0].end());
    const NodePairs neg = htgl::sample_negatives(g, 0, 2, pos.size(), 99);

    htgl::GradCheckOptions opts;
    opts.max_coords_per_group = 2;

    for (const VariantConfig& v : all_variants()) {
        const std::string label = v.name();
        CAPTURE(label);

        htgl::TrainOptions to;
        to.model = cfg;
        to.variant = v;
        to.seed = 3;
        to.max_epochs = 1;
        to.patience = 1;
        to.lr = 0.01;
        to.resample_negatives = false;
        const htgl::TrainResult result = htgl::train(g, task, to);
        REQUIRE(result.report.epochs.size() == 1);
        CHECK(std::isfinite(result.report.epochs[0].train_loss));

        const ModelParams params = htgl::variant_params(g, cfg, v, 3);
        auto scorer = htgl::make_scorer(v.attention, params);
        auto agg = htgl::make_aggregator(v.aggregation, params);
        const auto results = htgl::grad_check(
            params.entries(),
            [&](Tape& tape) {
                InitCoefficients e0 = htgl::variant_init(tape, g, params, emb, v.init, 13);
                ForwardOptions fo;
                fo.window_end = 1;
                ForwardResult res =
                    htgl::forward(tape, g, params, cfg, 0, e0, fo, scorer.get(), agg.get());
                return htgl::link_loss(tape, res.predictions[0], pos, neg);
            },
            opts);
        CHECK(htgl::worst_rel_err(results) < 1e-3);
    }
}

TEST_CASE("decoupled baseline matches its scripted reference on the toy fixture") {
    const HTGraph g = toy_graph();
    ModelConfig cfg = toy_config();
    cfg.horizon = 1;
    const ModelParams params = htgl::decoupled_params(g, cfg, 71);

    Tape tape;
    ForwardOptions fo;
    fo.window_end = 1;
    const ForwardResult got = htgl::decoupled_forward(tape, g, params, cfg, 0, fo);

    oracle::BaselineWeightsView w;
    for (const auto& nt : g.node_types) {
        w.proj_W.push_back(to_mat(params.at("proj." + nt.name + ".W")));
        w.proj_b.push_back(params.at("proj." + nt.name + ".b").value());
    }
    w.attn_W.resize(cfg.layers);
    w.attn_b.resize(cfg.layers);
    for (std::size_t layer = 1; layer <= cfg.layers; ++layer) {
        for (std::size_t t = 0; t < g.T(); ++t) {
            const std::string base = "attn." + std::to_string(layer) + "." + std::to_string(t);
            w.attn_W[layer - 1].push_back(to_mat(params.at(base + ".W")));
            w.attn_b[layer - 1].push_back(params.at(base + ".b").value());
        }
    }
    w.Wq = to_mat(params.at("temporal.Wq"));
    w.Wk = to_mat(params.at("temporal.Wk"));
    w.Wv = to_mat(params.at("temporal.Wv"));
    for (std::size_t s = 0; s < cfg.horizon; ++s) {
        const std::string base = "step." + std::to_string(s);
        w.step_W.push_back(to_mat(params.at(base + ".W")));
        w.step_b.push_back(params.at(base + ".b").value());
    }
    w.head1_W = to_mat(params.at("head.1.W"));
    w.head1_b = params.at("head.1.b").value();
    w.head2_W = to_mat(params.at("head.2.W"));
    w.head2_b = params.at("head.2.b").value();

    oracle::ConfigView cv;
    cv.dim = cfg.dim;
    cv.heads = cfg.heads;
    cv.layers = cfg.layers;
    cv.window = cfg.window;
    cv.horizon = cfg.horizon;
    cv.target_type = 0;
    cv.window_end = 1;
    const oracle::BaselineResultView ref = oracle::baseline_forward(to_view(g), w, cv);

    for (std::size_t layer = 0; layer < cfg.layers; ++layer)
        for (std::size_t ti = 0; ti < cfg.window; ++ti)
            for (std::size_t v = 0; v < g.node_types.size(); ++v) {
                const auto& a = got.trace.alpha[layer][ti][v];
                const auto& b = ref.alpha[layer][ti][v];
                REQUIRE(a.size() == b.size());
                for (std::size_t p = 0; p < a.size(); ++p)
                    CHECK(std::abs(a[p] - b[p]) < 1e-9);
            }
    REQUIRE(got.predictions.size() == ref.predictions.size());
    for (std::size_t s = 0; s < ref.predictions.size(); ++s)
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < cfg.dim; ++j)
                CHECK(std::abs(got.predictions[s].value()[i * cfg.dim + j] -
                               ref.predictions[s][i][j]) < 1e-8);

    // gradient correctness through the causal attention stack
    htgl::GradCheckOptions opts;
    opts.max_coords_per_group = 3;
    const auto results = htgl::grad_check(
        params.entries(),
        [&](Tape& t2) {
            ForwardOptions fo2;
            fo2.window_end = 1;
            ForwardResult res = htgl::decoupled_forward(t2, g, params, cfg, 0, fo2);
            return t2.mean_all(res.predictions[0]);
        },
        opts);
    CHECK(htgl::worst_rel_err(results) < 1e-4);
}

TEST_CASE("single-snapshot window collapses the sequence module to a value map") {
    const HTGraph g = toy_graph(7, 1);
    ModelConfig cfg = toy_config();
    cfg.window = 1;
    const ModelParams params = htgl::decoupled_params(g, cfg, 73);
    Tape tape;
    ForwardOptions fo;
    fo.window_end = 0;
    const ForwardResult res = htgl::decoupled_forward(tape, g, params, cfg, 0, fo);

    const oracle::Mat seq = to_mat(res.fused[0]);
    const oracle::Mat Wv = to_mat(params.at("temporal.Wv"));
    const oracle::Mat Ws = to_mat(params.at("step.0.W"));
    const std::vector<double> bs = params.at("step.0.b").value();
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            double z = bs[j];
            for (std::size_t a = 0; a < cfg.dim; ++a) {
                double pooled = 0.0;
                for (std::size_t d = 0; d < cfg.dim; ++d) pooled += seq[i][d] * Wv[d][a];
                z += pooled * Ws[a][j];
            }
            CHECK(std::abs(res.projected[0].value()[i * cfg.dim + j] - z) < 1e-12);
        }
}

TEST_CASE("baseline parameters grow with snapshots, primary ones only with the window") {
    const ModelConfig base_cfg = toy_config();

    ModelConfig wide = base_cfg;
    wide.window = 5;
    const HTGraph g = toy_graph();
    const std::size_t primary_small =
        htgl::variant_params(g, base_cfg, VariantConfig{}, 1).param_count();
    const std::size_t primary_wide =
        htgl::variant_params(g, wide, VariantConfig{}, 1).param_count();
    // only the window-by-horizon contraction block changes
    CHECK(primary_wide - primary_small == (wide.window - base_cfg.window) * base_cfg.horizon);

    const HTGraph g3 = toy_graph(7, 3);
    const HTGraph g5 = toy_graph(7, 5);
    const std::size_t baseline_3 = htgl::decoupled_params(g3, base_cfg, 1).param_count();
    const std::size_t baseline_5 = htgl::decoupled_params(g5, base_cfg, 1).param_count();
    const std::size_t per_snapshot =
        base_cfg.layers * (base_cfg.dim * base_cfg.heads + base_cfg.heads);
    CHECK(baseline_5 - baseline_3 == 2 * per_snapshot);

    // the primary registry is indifferent to how many snapshots exist
    CHECK(htgl::variant_params(g3, base_cfg, VariantConfig{}, 1).param_count() ==
          htgl::variant_params(g5, base_cfg, VariantConfig{}, 1).param_count());
}

#include "htgl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "htgl/losses.hpp"
#include "htgl/metrics.hpp"
#include "htgl/optim.hpp"
#include "json.hpp"

namespace htgl {

namespace {

constexpr std::uint64_t kEvalTag = 0x5EED0E7A1C0FFEE5ULL;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = seed;
    s ^= 0x9E3779B97F4A7C15ULL * (a + 1);
    s ^= 0xBF58476D1CE4E5B9ULL * (b + 1);
    s ^= 0x94D049BB133111EBULL * (c + 1);
    return s;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

NodePairs dedup_edges(const EdgeList& edges) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> uniq(edges.begin(), edges.end());
    return NodePairs(uniq.begin(), uniq.end());
}

double dot_rows(const Tensor& h, std::uint32_t i, std::uint32_t j) {
    const std::size_t d = h.cols();
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += h.value()[i * d + c] * h.value()[j * d + c];
    return acc;
}

}  // namespace

void TaskSpec::validate(const HTGraph& g) const {
    switch (kind) {
        case TaskKind::Link: {
            if (target_relation >= g.relation_types.size()) {
                throw std::invalid_argument("task: target relation index out of range");
            }
            const auto& rel = g.relation_types[target_relation];
            if (rel.src_type != rel.dst_type) {
                throw std::invalid_argument(
                    "task: link forecasting needs a relation connecting a type to itself; '" +
                    rel.name + "' joins '" + rel.src_type + "' to '" + rel.dst_type + "'");
            }
            break;
        }
        case TaskKind::Classify: {
            if (target_type >= g.node_types.size()) {
                throw std::invalid_argument("task: target type index out of range");
            }
            if (classes < 2) {
                throw std::invalid_argument("task: classification needs at least two classes");
            }
            if (labels.size() != g.node_types[target_type].count) {
                throw std::invalid_argument("task: " + std::to_string(labels.size()) +
                                            " labels for " +
                                            std::to_string(g.node_types[target_type].count) +
                                            " nodes of type '" +
                                            g.node_types[target_type].name + "'");
            }
            for (std::size_t l : labels) {
                if (l >= classes) throw std::invalid_argument("task: class label out of range");
            }
            break;
        }
        case TaskKind::Regress: {
            if (target_type >= g.node_types.size()) {
                throw std::invalid_argument("task: target type index out of range");
            }
            if (regress_targets.size() != g.node_types[target_type].count) {
                throw std::invalid_argument("task: " + std::to_string(regress_targets.size()) +
                                            " targets for " +
                                            std::to_string(g.node_types[target_type].count) +
                                            " nodes of type '" +
                                            g.node_types[target_type].name + "'");
            }
            for (double y : regress_targets) {
                if (!std::isfinite(y)) {
                    throw std::invalid_argument("task: non-finite regression target");
                }
            }
            break;
        }
    }
}

std::size_t TaskSpec::model_target(const HTGraph& g) const {
    if (kind == TaskKind::Link) {
        return g.type_index(g.relation_types[target_relation].src_type);
    }
    return target_type;
}

std::size_t TaskSpec::output_width() const {
    switch (kind) {
        case TaskKind::Link: return 0;  // embedding width follows the model dim
        case TaskKind::Classify: return classes;
        case TaskKind::Regress: return 1;
    }
    return 0;
}

namespace {

/// Everything a forward-and-score pass needs; shared by training epochs, the
/// per-epoch validation, and the standalone evaluation entry point.
struct RunContext {
    const HTGraph& g;
    const TaskSpec& task;
    ModelConfig cfg;  // head width already task-adjusted
    std::size_t target_type;
    const ModelParams& params;
    const std::map<std::string, TypeEmbedding>& embeddings;
    InitKind init;
    AttentionScorer& scorer;
    Aggregator& aggregator;
    std::uint64_t seed;

    ForwardResult run(Tape& tape, std::size_t tau) const {
        InitCoefficients e0 = variant_init(tape, g, params, embeddings, init, seed);
        ForwardOptions fo;
        fo.window_end = tau - 1;
        return forward(tape, g, params, cfg, target_type, e0, fo, &scorer, &aggregator);
    }

    NodePairs positives(std::size_t tau, std::size_t s) const {
        NodePairs pos = dedup_edges(g.snapshots[tau + s].edges[task.target_relation]);
        if (pos.empty()) {
            throw std::invalid_argument("link task: relation '" +
                                        g.relation_types[task.target_relation].name +
                                        "' has no edges at snapshot " + std::to_string(tau + s));
        }
        return pos;
    }

    std::map<std::string, double> evaluate_targets(const std::vector<std::size_t>& targets) const {
        std::vector<double> pos_scores, neg_scores, pred_reg, truth_reg;
        std::vector<std::size_t> pred_cls, truth_cls;
        for (std::size_t tau : targets) {
            Tape tape;
            ForwardResult res = run(tape, tau);
            for (std::size_t s = 0; s < cfg.horizon; ++s) {
                const Tensor& out = res.predictions[s];
                switch (task.kind) {
                    case TaskKind::Link: {
                        const NodePairs pos = positives(tau, s);
                        const NodePairs neg =
                            sample_negatives(g, task.target_relation, tau + s, pos.size(),
                                             mix_seed(seed ^ kEvalTag, 0, tau, s));
                        for (const auto& [i, j] : pos) pos_scores.push_back(dot_rows(out, i, j));
                        for (const auto& [i, j] : neg) neg_scores.push_back(dot_rows(out, i, j));
                        break;
                    }
                    case TaskKind::Classify: {
                        for (std::size_t r = 0; r < out.rows(); ++r) {
                            std::size_t arg = 0;
                            for (std::size_t c = 1; c < out.cols(); ++c) {
                                if (out.value()[r * out.cols() + c] >
                                    out.value()[r * out.cols() + arg]) {
                                    arg = c;
                                }
                            }
                            pred_cls.push_back(arg);
                            truth_cls.push_back(task.labels[r]);
                        }
                        break;
                    }
                    case TaskKind::Regress: {
                        for (std::size_t r = 0; r < out.rows(); ++r) {
                            pred_reg.push_back(out.value()[r]);
                            truth_reg.push_back(task.regress_targets[r]);
                        }
                        break;
                    }
                }
            }
        }
        switch (task.kind) {
            case TaskKind::Link: return link_metrics(pos_scores, neg_scores);
            case TaskKind::Classify: return classify_metrics(pred_cls, truth_cls, task.classes);
            case TaskKind::Regress: return regress_metrics(pred_reg, truth_reg);
        }
        return {};
    }

    Tensor epoch_loss(Tape& tape, const ForwardResult& res, std::size_t tau,
                      std::uint64_t neg_round) const {
        Tensor total = Tensor::scalar(0.0);
        bool first = true;
        for (std::size_t s = 0; s < cfg.horizon; ++s) {
            Tensor term = [&] {
                switch (task.kind) {
                    case TaskKind::Link: {
                        const NodePairs pos = positives(tau, s);
                        const NodePairs neg =
                            sample_negatives(g, task.target_relation, tau + s, pos.size(),
                                             mix_seed(seed, neg_round, tau, s));
                        return link_loss(tape, res.predictions[s], pos, neg);
                    }
                    case TaskKind::Classify:
                        return classify_loss(tape, res.predictions[s], task.labels);
                    case TaskKind::Regress:
                        return regress_loss(tape, res.predictions[s], task.regress_targets);
                }
                throw std::logic_error("unreachable task kind");
            }();
            total = first ? term : tape.add(total, term);
            first = false;
        }
        return total;
    }
};

const char* stop_metric(TaskKind kind) {
    switch (kind) {
        case TaskKind::Link: return "auc";
        case TaskKind::Classify: return "macro_f1";
        case TaskKind::Regress: return "mae";
    }
    return "auc";
}

}  // namespace

TrainResult train(const HTGraph& g, const TaskSpec& task, const TrainOptions& opt) {
    task.validate(g);
    ModelConfig cfg = opt.model;
    cfg.head_out = task.output_width();
    cfg.validate();
    if (opt.max_epochs == 0 || opt.patience == 0) {
        throw std::invalid_argument("train: max_epochs and patience must be positive");
    }
    const TemporalSplit split = split_temporal(g, cfg.window, cfg.horizon, opt.n_val, opt.n_test);
    if (split.train.empty()) {
        throw std::invalid_argument("train: no training targets remain after the split");
    }

    ProviderConfig pc = opt.provider;
    if (pc.kind == "fallback") pc.dim = cfg.llm_dim;
    EmbeddingProvider provider(pc);
    auto embeddings = embed_dataset(g, provider);

    ModelParams params = variant_params(g, cfg, opt.variant, opt.seed);
    std::vector<std::pair<std::string, Tensor>> learned;
    for (const auto& entry : params.entries()) {
        if (opt.freeze_similarity && entry.first.rfind("llm.", 0) == 0) continue;
        learned.push_back(entry);
    }
    Adam adam(learned, {opt.lr, 0.9, 0.999, 1e-8, opt.weight_decay});

    auto scorer = make_scorer(opt.variant.attention, params);
    auto aggregator = make_aggregator(opt.variant.aggregation, params);
    RunContext ctx{g,          task,             cfg,     task.model_target(g), params,
                   embeddings, opt.variant.init, *scorer, *aggregator,          opt.seed};

    // pre-flight: every forecast step of every split target must be scorable
    if (task.kind == TaskKind::Link) {
        for (const auto* side : {&split.train, &split.val, &split.test}) {
            for (std::size_t tau : *side) {
                for (std::size_t s = 0; s < cfg.horizon; ++s) ctx.positives(tau, s);
            }
        }
    }

    TrainReport report;
    report.param_count = params.param_count();
    const char* key = stop_metric(task.kind);
    const bool higher_better = task.kind != TaskKind::Regress;
    double best = higher_better ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values;
    std::size_t bad_epochs = 0;
    const double run_start = now_ms();

    for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
        const double epoch_start = now_ms();
        adam.zero_grad();
        double total_loss = 0.0;
        for (std::size_t tau : split.train) {
            Tape tape;
            ForwardResult res = ctx.run(tape, tau);
            Tensor loss = ctx.epoch_loss(tape, res, tau,
                                         opt.resample_negatives ? epoch + 1 : 0);
            total_loss += loss.value()[0];
            tape.backward(loss);
        }
        if (!std::isfinite(total_loss)) {
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch + 1));
        }
        adam.step();

        EpochRecord rec;
        rec.train_loss = total_loss;
        if (!split.val.empty()) {
            try {
                rec.val_metrics = ctx.evaluate_targets(split.val);
            } catch (const std::exception& e) {
                throw std::runtime_error("training diverged at epoch " +
                                         std::to_string(epoch + 1) + ": " + e.what());
            }
        }
        rec.wall_ms = now_ms() - epoch_start;
        report.epochs.push_back(std::move(rec));

        if (split.val.empty()) {
            report.best_epoch = epoch;
            continue;
        }
        const double current = report.epochs.back().val_metrics.at(key);
        const bool improved = higher_better ? current > best : current < best;
        if (improved) {
            best = current;
            report.best_epoch = epoch;
            bad_epochs = 0;
            best_values.clear();
            for (const auto& [name, t] : params.entries()) best_values.push_back(t.value());
        } else if (++bad_epochs >= opt.patience) {
            break;
        }
    }

    if (!best_values.empty()) {
        for (std::size_t i = 0; i < params.entries().size(); ++i) {
            params.entries()[i].second.value() = best_values[i];
        }
    }
    if (!split.test.empty()) report.test_metrics = ctx.evaluate_targets(split.test);
    report.total_wall_ms = now_ms() - run_start;
    return {std::move(report), std::move(params), std::move(embeddings)};
}

std::map<std::string, double> evaluate(const HTGraph& g, const TaskSpec& task,
                                       const TrainOptions& opt, const ModelParams& params,
                                       const std::map<std::string, TypeEmbedding>& embeddings,
                                       const std::vector<std::size_t>& targets) {
    task.validate(g);
    if (targets.empty()) {
        throw std::invalid_argument("evaluate: no forecast targets given");
    }
    ModelConfig cfg = opt.model;
    cfg.head_out = task.output_width();
    cfg.validate();
    for (std::size_t tau : targets) {
        if (tau < cfg.window || tau + cfg.horizon > g.T()) {
            throw std::invalid_argument("evaluate: target " + std::to_string(tau) +
                                        " leaves no room for the window or horizon");
        }
    }
    auto scorer = make_scorer(opt.variant.attention, params);
    auto aggregator = make_aggregator(opt.variant.aggregation, params);
    RunContext ctx{g,          task,             cfg,     task.model_target(g), params,
                   embeddings, opt.variant.init, *scorer, *aggregator,          opt.seed};
    return ctx.evaluate_targets(targets);
}

std::string report_to_json(const TrainReport& report) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back({{"train_loss", e.train_loss},
                          {"val_metrics", e.val_metrics},
                          {"wall_ms", e.wall_ms}});
    }
    nlohmann::json j{{"epochs", std::move(epochs)},
                     {"best_epoch", report.best_epoch},
                     {"test_metrics", report.test_metrics},
                     {"param_count", report.param_count},
                     {"total_wall_ms", report.total_wall_ms}};
    return j.dump(2);
}

void write_report(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report '" + path + "'");
    out << report_to_json(report) << "\n";
}

void write_curves(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write curves '" + path + "'");
    std::vector<std::string> keys;
    if (!report.epochs.empty()) {
        for (const auto& [k, v] : report.epochs.front().val_metrics) keys.push_back(k);
    }
    out << "epoch,train_loss";
    for (const auto& k : keys) out << ",val_" << k;
    out << ",wall_ms\n";
    char buf[64];
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        const auto& e = report.epochs[i];
        out << i;
        std::snprintf(buf, sizeof buf, "%.17g", e.train_loss);
        out << "," << buf;
        for (const auto& k : keys) {
            std::snprintf(buf, sizeof buf, "%.17g", e.val_metrics.at(k));
            out << "," << buf;
        }
        std::snprintf(buf, sizeof buf, "%.3f", e.wall_ms);
        out << "," << buf << "\n";
    }
}

}  // namespace htgl

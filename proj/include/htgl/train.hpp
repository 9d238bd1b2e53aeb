#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/model.hpp"
#include "htgl/params.hpp"
#include "htgl/prompt.hpp"
#include "htgl/variants.hpp"

namespace htgl {

enum class TaskKind { Link, Classify, Regress };

struct TaskSpec {
    TaskKind kind = TaskKind::Link;
    std::size_t target_relation = 0;  // link: a same-type relation to forecast
    std::size_t target_type = 0;      // classify/regress (derived for link)
    std::size_t classes = 0;          // classify
    std::vector<std::size_t> labels;          // classify: one per target-type node
    std::vector<double> regress_targets;      // regress: one per target-type node

    void validate(const HTGraph& g) const;
    /// The node type the model must embed for this task.
    std::size_t model_target(const HTGraph& g) const;
    std::size_t output_width() const;  // task head width (0 keeps the default)
};

struct TrainOptions {
    ModelConfig model;
    VariantConfig variant;            // default: the full model
    std::uint64_t seed = 1;
    std::size_t max_epochs = 200;
    std::size_t patience = 25;
    double lr = 0.01;
    double weight_decay = 0.0;
    std::size_t n_val = 1;
    std::size_t n_test = 1;
    bool resample_negatives = true;   // fresh training negatives each epoch
    bool freeze_similarity = false;   // exclude the coefficient projections
    ProviderConfig provider;          // type-embedding source (fallback default)
};

struct EpochRecord {
    double train_loss = 0.0;
    std::map<std::string, double> val_metrics;
    double wall_ms = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // index into epochs
    std::map<std::string, double> test_metrics;
    std::size_t param_count = 0;
    double total_wall_ms = 0.0;
};

struct TrainResult {
    TrainReport report;
    ModelParams params;
    std::map<std::string, TypeEmbedding> embeddings;
};

/// Full-graph training with per-epoch validation, patience-based early
/// stopping on the task metric, and best-epoch restoration before the test
/// evaluation. Deterministic under (config, seed).
TrainResult train(const HTGraph& g, const TaskSpec& task, const TrainOptions& opt);

/// Metrics of a trained model over the given forecast targets (first
/// predicted snapshot indices).
std::map<std::string, double> evaluate(const HTGraph& g, const TaskSpec& task,
                                       const TrainOptions& opt, const ModelParams& params,
                                       const std::map<std::string, TypeEmbedding>& embeddings,
                                       const std::vector<std::size_t>& targets);

std::string report_to_json(const TrainReport& report);
void write_report(const TrainReport& report, const std::string& path);
void write_curves(const TrainReport& report, const std::string& path);

}  // namespace htgl

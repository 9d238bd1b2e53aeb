#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "htgl/graph.hpp"
#include "htgl/tensor.hpp"

namespace htgl {

/// Dimensions of the forecasting model. `window` snapshots are consumed per
/// forward pass and `horizon` future steps predicted.
struct ModelConfig {
    std::size_t dim = 32;      // shared representation width
    std::size_t heads = 1;     // attention hidden width
    std::size_t layers = 2;    // stacked relational layers
    std::size_t window = 8;
    std::size_t horizon = 1;
    std::size_t llm_dim = 64;  // type-embedding width
    std::size_t sim_dim = 0;   // similarity projection width; 0 -> dim
    std::size_t head_out = 0;  // task head output width; 0 -> dim

    std::size_t sim_width() const { return sim_dim ? sim_dim : dim; }
    std::size_t head_width() const { return head_out ? head_out : dim; }
    void validate() const;
};

/// Named, ordered parameter registry. Insertion order is fixed, so optimizer
/// sweeps, random initialization, and checkpoints are all deterministic under
/// one seed. Weights draw from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
class ModelParams {
public:
    explicit ModelParams(std::uint64_t seed);

    Tensor add(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in);
    Tensor add_zeros(const std::string& name, std::vector<std::size_t> shape);

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    bool has(const std::string& name) const;
    Tensor at(const std::string& name) const;
    std::size_t param_count() const;

    /// Gate weights of one recurrent scorer; `layer` is 1-based.
    GruParams gru(std::size_t layer, const std::string& relation) const;

    void save(const std::string& path) const;
    /// Fills existing tensors from a checkpoint; the file must contain exactly
    /// this registry's names with matching shapes.
    void load(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::map<std::string, std::size_t> index_;
    std::mt19937_64 gen_;
};

/// The default model's parameter set for a dataset: per-type projections,
/// per-(layer, relation) recurrent scorers, similarity projections for the
/// initial coefficients, the temporal contraction, and the task head.
ModelParams default_params(const HTGraph& g, const ModelConfig& cfg, std::uint64_t seed);

}  // namespace htgl

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "htgl/tensor.hpp"

namespace htgl {

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: applied to parameters directly
};

/// Moment-tracking optimizer over a fixed parameter list. step() consumes the
/// gradients currently held by the parameters; callers zero them afterwards.
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor>> params, AdamOptions opts);

    /// One update. Throws (naming the parameter) on a non-finite gradient.
    void step();
    void zero_grad();
    std::size_t steps() const { return t_; }
    const AdamOptions& options() const { return opts_; }

private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamOptions opts_;
    std::size_t t_ = 0;
};

}  // namespace htgl

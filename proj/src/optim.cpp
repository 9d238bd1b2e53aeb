#include "htgl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace htgl {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, AdamOptions opts)
    : params_(std::move(params)), opts_(opts) {
    for (const auto& [name, t] : params_) {
        if (!t.requires_grad()) {
            throw std::invalid_argument("parameter '" + name + "' does not track gradients");
        }
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, double(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        const auto& [name, tensor] = params_[p];
        auto& value = tensor.value();
        const auto& grad = tensor.grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g)) {
                throw std::runtime_error("non-finite gradient in parameter '" + name + "'");
            }
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps) +
                        opts_.lr * opts_.weight_decay * value[i];
        }
    }
}

void Adam::zero_grad() {
    for (const auto& [name, t] : params_) t.zero_grad();
}

}  // namespace htgl

#include "htgl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace htgl {

std::vector<GradCheckResult> grad_check(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::function<Tensor(Tape&)>& build_loss, const GradCheckOptions& opts) {
    if (params.empty()) {
        throw std::invalid_argument("grad_check: no parameter groups");
    }
    for (auto& [name, p] : params) {
        if (!p.requires_grad()) {
            throw std::invalid_argument("grad_check: parameter group '" + name +
                                        "' does not track gradients");
        }
        p.zero_grad();
    }

    // analytic sweep
    {
        Tape tape;
        Tensor loss = build_loss(tape);
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, p] : params) analytic.push_back(p.grad());

    auto eval = [&]() {
        Tape tape;
        return build_loss(tape).item();
    };

    std::vector<GradCheckResult> results;
    for (std::size_t g = 0; g < params.size(); ++g) {
        const Tensor& p = params[g].second;
        GradCheckResult res;
        res.name = params[g].first;
        const std::size_t n = p.size();
        std::size_t stride = 1;
        if (opts.max_coords_per_group > 0 && n > opts.max_coords_per_group) {
            stride = (n + opts.max_coords_per_group - 1) / opts.max_coords_per_group;
        }
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = p.value()[i];
            p.value()[i] = saved + opts.eps;
            const double fp = eval();
            p.value()[i] = saved - opts.eps;
            const double fm = eval();
            p.value()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * opts.eps);
            const double a = analytic[g][i];
            const double rel = std::abs(a - numeric) /
                               std::max(opts.denom_floor, std::abs(a) + std::abs(numeric));
            if (rel >= res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_index = i;
                res.analytic = a;
                res.numeric = numeric;
            }
            ++res.checked;
        }
        results.push_back(std::move(res));
    }
    return results;
}

double worst_rel_err(const std::vector<GradCheckResult>& results) {
    double w = 0.0;
    for (const auto& r : results) w = std::max(w, r.max_rel_err);
    return w;
}

}  // namespace htgl

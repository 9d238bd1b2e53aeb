#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htgl/tensor.hpp"

namespace htgl {

struct GradCheckResult {
    std::string name;          // parameter group
    double max_rel_err = 0.0;  // worst coordinate in the group
    std::size_t worst_index = 0;
    double analytic = 0.0;  // grads at the worst coordinate
    double numeric = 0.0;
    std::size_t checked = 0;  // coordinates actually probed
};

struct GradCheckOptions {
    double eps = 1e-5;
    // 0 checks every coordinate; otherwise an evenly strided subset per group.
    std::size_t max_coords_per_group = 0;
    // Absolute floor of the relative-error denominator. Central differences on
    // a loss of magnitude ~1 resolve gradients no finer than |loss|*ulp/eps
    // (~1e-10 at the default eps), so near-zero gradients whose discrepancy
    // sits at that roundoff scale must not register as large relative errors.
    // A genuinely wrong gradient still trips the check: its discrepancy is on
    // the scale of the gradients themselves, far above this floor.
    double denom_floor = 1e-5;
};

/// Compares analytic gradients against central differences.
///
/// build_loss must rebuild the full forward pass on the given tape and return
/// the scalar loss; it is called once for the analytic sweep and twice per
/// probed coordinate. Relative error per coordinate is
/// |a - n| / max(denom_floor, |a| + |n|).
std::vector<GradCheckResult> grad_check(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::function<Tensor(Tape&)>& build_loss, const GradCheckOptions& opts = {});

/// Largest max_rel_err across all groups.
double worst_rel_err(const std::vector<GradCheckResult>& results);

}  // namespace htgl

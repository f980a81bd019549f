#pragma once

#include <functional>
#include <string>

#include "jtner/encoder.hpp"
#include "jtner/tape.hpp"

namespace jtner {

/// Builds a scalar loss over the current parameter values; called repeatedly
/// with perturbed parameters, so it must read `params` fresh each time.
using LossBuilder = std::function<int(Tape&, ModelParams&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

/// Compares analytic gradients against central finite differences
/// (L(t+eps) - L(t-eps)) / 2eps for every element of every parameter.
/// Relative error is |a - f| / max(1e-8, |a| + |f|).
GradCheckResult grad_check(ModelParams& params, const LossBuilder& build_loss, double epsilon);

}  // namespace jtner

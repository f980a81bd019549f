#include "jtner/gradcheck.hpp"

#include <cmath>

#include "jtner/errors.hpp"

namespace jtner {

namespace {

double eval_loss(const LossBuilder& build_loss, ModelParams& params) {
    Tape tape;
    const int loss = build_loss(tape, params);
    const Tensor& v = tape.value(loss);
    if (v.size() != 1) throw ContractError("grad_check loss must be scalar, got shape " + shape_str(v.shape));
    return v.data[0];
}

}  // namespace

GradCheckResult grad_check(ModelParams& params, const LossBuilder& build_loss, double epsilon) {
    if (epsilon <= 0.0) throw ContractError("grad_check epsilon must be > 0");

    GradMap analytic;
    {
        Tape tape;
        const int loss = build_loss(tape, params);
        analytic = tape.backward(loss);
    }

    GradCheckResult result;
    for (auto& [name, grad] : analytic) {
        Tensor& p = params.at(name);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + epsilon;
            const double up = eval_loss(build_loss, params);
            p.data[i] = saved - epsilon;
            const double down = eval_loss(build_loss, params);
            p.data[i] = saved;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = grad.data[i];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = name;
                result.worst_index = i;
            }
        }
    }
    return result;
}

}  // namespace jtner

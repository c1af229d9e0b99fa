#include "aya/training/optimizer.hpp"

#include "aya/common/error.hpp"

#include <cmath>

namespace aya::training {

OptimizerState make_optimizer_state(std::span<Parameter* const> params, double beta1, double beta2, double eps)
{
    OptimizerState state;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    for (const Parameter* p : params) {
        state.m.push_back(Tensor::zeros_like(p->value));
        state.v.push_back(Tensor::zeros_like(p->value));
    }
    return state;
}

void adam_step(std::span<Parameter* const> params, OptimizerState& state, double lr)
{
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw numerics::ShapeError("optimizer state has " + std::to_string(state.m.size()) + " moments for " +
                                   std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        numerics::require_same_shape(params[i]->value, params[i]->grad, "adam_step grad");
        numerics::require_same_shape(params[i]->value, state.m[i], "adam_step m");
        numerics::require_same_shape(params[i]->value, state.v[i], "adam_step v");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        auto value = p.value.data();
        auto grad = p.grad.data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
        }
        state.m[i].settle("adam_step");
        state.v[i].settle("adam_step");
        p.value.settle("adam_step");
    }
}

double global_grad_norm(std::span<Parameter* const> params)
{
    double sq = 0.0;
    for (const Parameter* p : params) {
        for (double g : p->grad.data()) {
            sq += g * g;
        }
    }
    return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm)
{
    const double norm = global_grad_norm(params);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (Parameter* p : params) {
            for (double& g : p->grad.data()) {
                g *= s;
            }
            p->grad.settle("clip_grad_norm");
        }
    }
    return norm;
}

} // namespace aya::training

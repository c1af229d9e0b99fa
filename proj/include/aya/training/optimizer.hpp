#pragma once

#include "aya/numerics/autograd.hpp"

#include <span>
#include <vector>

namespace aya::training {

using numerics::Parameter;
using numerics::Tensor;

struct OptimizerState {
    std::uint64_t step = 0;
    // First and second moments, in parameter order.
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Zero moments shaped like `params`.
OptimizerState make_optimizer_state(std::span<Parameter* const> params, double beta1 = 0.9, double beta2 = 0.999,
                                    double eps = 1e-8);

// One bias-corrected Adam update from each parameter's grad:
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Moments share the parameter's dtype.
void adam_step(std::span<Parameter* const> params, OptimizerState& state, double lr);

// L2 norm over every parameter gradient.
double global_grad_norm(std::span<Parameter* const> params);
// Rescales gradients so the global norm is at most max_norm; returns the norm
// before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

} // namespace aya::training

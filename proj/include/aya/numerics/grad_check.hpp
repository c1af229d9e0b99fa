#pragma once

#include "aya/numerics/autograd.hpp"

#include <functional>
#include <span>
#include <string>

namespace aya::numerics {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

// Compares reverse-mode gradients of `loss` against central differences
// (f(w+eps) - f(w-eps)) / 2eps for every element of every parameter.
// Relative error is |a - n| / max(|a|, |n|, floor); parameters must be f64.
GradCheckResult grad_check(const std::function<Var()>& loss, std::span<Parameter* const> parameters,
                           double eps = 1e-5, double floor = 1e-6);

} // namespace aya::numerics

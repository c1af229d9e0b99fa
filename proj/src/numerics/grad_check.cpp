#include "aya/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace aya::numerics {

GradCheckResult grad_check(const std::function<Var()>& loss, std::span<Parameter* const> parameters, double eps,
                           double floor)
{
    for (Parameter* p : parameters) {
        if (p->value.dtype() != DType::f64) {
            throw InputError("grad_check_dtype", "grad_check requires f64 parameters; '" + p->name + "' is "
                                                     + std::string(to_string(p->value.dtype())));
        }
        p->zero_grad();
    }
    backward(loss());

    GradCheckResult result;
    for (Parameter* p : parameters) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double original = p->value[i];
            p->value[i] = original + eps;
            const double up = loss().value().item();
            p->value[i] = original - eps;
            const double down = loss().value().item();
            p->value[i] = original;

            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
            const double rel = std::abs(analytic - numeric) / denom;
            ++result.checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = p->name;
                result.worst_index = i;
            }
        }
    }
    return result;
}

} // namespace aya::numerics

#pragma once

#include "aya/numerics/ops.hpp"
#include "aya/numerics/tensor.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aya::numerics {

// A trainable tensor and its accumulated gradient.
class Parameter {
public:
    Parameter() = default;
    Parameter(std::string name, Tensor value)
        : name(std::move(name)), value(std::move(value)), grad(Tensor::zeros_like(this->value))
    {
    }

    void zero_grad() { grad = Tensor::zeros_like(value); }

    std::string name;
    Tensor value;
    Tensor grad;
};

namespace detail {
struct Node;
}

class Var;
using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Var> parents)>;

// Handle to a node of the reverse-mode graph. Copies share the node.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    DType dtype() const { return value().dtype(); }
    bool requires_grad() const;
    // Gradient buffer, zero-filled on first access. Parameter leaves alias the
    // parameter's own grad tensor.
    Tensor& grad();
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    friend Var constant(Tensor value);
    friend Var leaf(Parameter& parameter, bool track);
    friend Var make_result(Tensor value, std::vector<Var> parents, BackwardFn backward);
    friend void backward(const Var& root);

    explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

Var constant(Tensor value);
// Wraps a parameter without copying it. With track == false the leaf behaves
// like a constant, which is how inference runs the same forward code.
Var leaf(Parameter& parameter, bool track = true);
// Records an op result. `backward` is dropped when no parent needs gradients.
Var make_result(Tensor value, std::vector<Var> parents, BackwardFn backward);

// Reverse sweep from a scalar root; gradients accumulate into parameters.
void backward(const Var& root);

namespace ag {

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var sum(const Var& a);
Var matmul(const Var& a, const Var& b);
// a[m,k] . b[n,k]^T; used for the tied output projection.
Var matmul_nt(const Var& a, const Var& b);
Var swish(const Var& x);
Var layer_norm(const Var& x, const Var& gain, double eps = default_norm_eps);
// Gathers rows of table[V,d] for `ids`.
Var embedding(const Var& table, std::span<const TokenId> ids);
// Sum of masked negative log-likelihoods (a [1] tensor).
Var nll_sum(const Var& logits, std::span<const TokenId> targets, std::span<const double> mask);
Var cross_entropy(const Var& logits, std::span<const TokenId> targets, std::span<const double> mask);

} // namespace ag

} // namespace aya::numerics

#include "aya/numerics/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace aya::numerics {

namespace detail {

struct Node {
    Tensor own_value;
    Tensor own_grad;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
    std::vector<Var> parents;
    BackwardFn backward;

    const Tensor& value() const { return parameter ? parameter->value : own_value; }
    Tensor& grad()
    {
        if (parameter) {
            if (parameter->grad.shape() != parameter->value.shape()) {
                parameter->zero_grad();
            }
            return parameter->grad;
        }
        if (own_grad.shape() != own_value.shape()) {
            own_grad = Tensor(own_value.shape(), DType::f64);
        }
        return own_grad;
    }
};

} // namespace detail

const Tensor& Var::value() const
{
    return node_->value();
}

bool Var::requires_grad() const
{
    return node_ && node_->requires_grad;
}

Tensor& Var::grad()
{
    return node_->grad();
}

Var constant(Tensor value)
{
    auto node = std::make_shared<detail::Node>();
    node->own_value = std::move(value);
    return Var(std::move(node));
}

Var leaf(Parameter& parameter, bool track)
{
    auto node = std::make_shared<detail::Node>();
    node->parameter = &parameter;
    node->requires_grad = track;
    return Var(std::move(node));
}

Var make_result(Tensor value, std::vector<Var> parents, BackwardFn backward)
{
    auto node = std::make_shared<detail::Node>();
    node->own_value = std::move(value);
    node->requires_grad = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
    if (node->requires_grad) {
        node->parents = std::move(parents);
        node->backward = std::move(backward);
    }
    return Var(std::move(node));
}

void backward(const Var& root)
{
    if (!root || root.value().size() != 1) {
        throw ShapeError("backward: root must be a scalar");
    }
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.node_.get(), 0}};
    seen.insert(root.node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].node_.get();
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }
    root.node_->grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward) {
            node->backward(node->grad(), node->parents);
        }
    }
}

namespace ag {
namespace {

void accumulate(Var& target, const Tensor& g)
{
    if (!target.requires_grad()) {
        return;
    }
    Tensor& dst = target.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += g[i];
    }
}

} // namespace

Var add(const Var& a, const Var& b)
{
    return make_result(numerics::add(a.value(), b.value()), {a, b},
                       [](const Tensor& g, std::span<Var> p) {
                           accumulate(p[0], g);
                           accumulate(p[1], g);
                       });
}

Var mul(const Var& a, const Var& b)
{
    return make_result(numerics::mul(a.value(), b.value()), {a, b}, [](const Tensor& g, std::span<Var> p) {
        const Tensor& av = p[0].value();
        const Tensor& bv = p[1].value();
        if (p[0].requires_grad()) {
            Tensor& da = p[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                da[i] += g[i] * bv[i];
            }
        }
        if (p[1].requires_grad()) {
            Tensor& db = p[1].grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                db[i] += g[i] * av[i];
            }
        }
    });
}

Var scale(const Var& a, double s)
{
    return make_result(numerics::scale(a.value(), s), {a}, [s](const Tensor& g, std::span<Var> p) {
        Tensor& da = p[0].grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += s * g[i];
        }
    });
}

Var sum(const Var& a)
{
    double total = 0.0;
    for (double v : a.value().data()) {
        total += v;
    }
    Tensor out = Tensor::scalar(total, a.dtype());
    return make_result(std::move(out), {a}, [](const Tensor& g, std::span<Var> p) {
        Tensor& da = p[0].grad();
        for (double& v : da.data()) {
            v += g[0];
        }
    });
}

Var matmul(const Var& a, const Var& b)
{
    return make_result(numerics::matmul(a.value(), b.value()), {a, b}, [](const Tensor& g, std::span<Var> p) {
        const Tensor& av = p[0].value();
        const Tensor& bv = p[1].value();
        const std::size_t m = av.rows();
        const std::size_t k = av.cols();
        const std::size_t n = bv.cols();
        if (p[0].requires_grad()) {
            kernels::gemm_nt(g.data(), bv.data(), p[0].grad().data(), m, n, k);
        }
        if (p[1].requires_grad()) {
            kernels::gemm_tn(av.data(), g.data(), p[1].grad().data(), m, k, n);
        }
    });
}

Var matmul_nt(const Var& a, const Var& b)
{
    return make_result(numerics::matmul_nt(a.value(), b.value()), {a, b}, [](const Tensor& g, std::span<Var> p) {
        const Tensor& av = p[0].value();
        const Tensor& bv = p[1].value();
        const std::size_t m = av.rows();
        const std::size_t k = av.cols();
        const std::size_t n = bv.rows();
        if (p[0].requires_grad()) {
            kernels::gemm_nn(g.data(), bv.data(), p[0].grad().data(), m, n, k);
        }
        if (p[1].requires_grad()) {
            kernels::gemm_tn(g.data(), av.data(), p[1].grad().data(), m, n, k);
        }
    });
}

Var swish(const Var& x)
{
    return make_result(numerics::swish(x.value()), {x}, [](const Tensor& g, std::span<Var> p) {
        const Tensor& xv = p[0].value();
        Tensor& dx = p[0].grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = sigmoid(xv[i]);
            dx[i] += g[i] * (s + xv[i] * s * (1.0 - s));
        }
    });
}

Var layer_norm(const Var& x, const Var& gain, double eps)
{
    Tensor out = numerics::layer_norm(x.value(), gain.value(), eps);
    return make_result(std::move(out), {x, gain}, [eps](const Tensor& g, std::span<Var> p) {
        const Tensor& xv = p[0].value();
        const Tensor& gv = p[1].value();
        const std::size_t d = gv.size();
        const std::size_t rows = xv.size() / d;
        std::vector<double> xhat(d);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto in = xv.row(r);
            double mean = 0.0;
            for (double v : in) {
                mean += v;
            }
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (double v : in) {
                var += (v - mean) * (v - mean);
            }
            var /= static_cast<double>(d);
            const double inv_std = 1.0 / std::sqrt(var + eps);
            double mean_dxhat = 0.0;
            double mean_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                xhat[c] = (in[c] - mean) * inv_std;
                dxhat[c] = g[r * d + c] * gv[c];
                mean_dxhat += dxhat[c];
                mean_dxhat_xhat += dxhat[c] * xhat[c];
            }
            mean_dxhat /= static_cast<double>(d);
            mean_dxhat_xhat /= static_cast<double>(d);
            if (p[1].requires_grad()) {
                Tensor& dg = p[1].grad();
                for (std::size_t c = 0; c < d; ++c) {
                    dg[c] += g[r * d + c] * xhat[c];
                }
            }
            if (p[0].requires_grad()) {
                Tensor& dx = p[0].grad();
                for (std::size_t c = 0; c < d; ++c) {
                    dx[r * d + c] += inv_std * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
                }
            }
        }
    });
}

Var embedding(const Var& table, std::span<const TokenId> ids)
{
    const Tensor& tv = table.value();
    require_rank(tv, 2, "embedding");
    const std::size_t d = tv.cols();
    Tensor out({ids.size(), d}, tv.dtype());
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] >= tv.rows()) {
            throw InputError("token_out_of_range", "token id " + std::to_string(ids[t]) + " >= vocab size "
                                                       + std::to_string(tv.rows()));
        }
        std::copy_n(tv.row(ids[t]).begin(), d, out.row(t).begin());
    }
    std::vector<TokenId> saved(ids.begin(), ids.end());
    return make_result(std::move(out), {table}, [saved = std::move(saved), d](const Tensor& g, std::span<Var> p) {
        Tensor& dt = p[0].grad();
        for (std::size_t t = 0; t < saved.size(); ++t) {
            for (std::size_t c = 0; c < d; ++c) {
                dt[saved[t] * d + c] += g[t * d + c];
            }
        }
    });
}

Var nll_sum(const Var& logits, std::span<const TokenId> targets, std::span<const double> mask)
{
    check_cross_entropy_inputs(logits.value(), targets, mask);
    const Tensor logp = log_softmax_rows(logits.value());
    double total = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (mask[t] == 1.0) {
            total -= logp.at(t, targets[t]);
        }
    }
    std::vector<TokenId> tgt(targets.begin(), targets.end());
    std::vector<double> msk(mask.begin(), mask.end());
    return make_result(Tensor::scalar(total, DType::f64), {logits},
                       [logp, tgt = std::move(tgt), msk = std::move(msk)](const Tensor& g, std::span<Var> p) {
                           Tensor& dl = p[0].grad();
                           const std::size_t vocab = logp.cols();
                           for (std::size_t t = 0; t < tgt.size(); ++t) {
                               if (msk[t] != 1.0) {
                                   continue;
                               }
                               for (std::size_t c = 0; c < vocab; ++c) {
                                   dl[t * vocab + c] += g[0] * std::exp(logp.at(t, c));
                               }
                               dl[t * vocab + tgt[t]] -= g[0];
                           }
                       });
}

Var cross_entropy(const Var& logits, std::span<const TokenId> targets, std::span<const double> mask)
{
    const std::size_t count = check_cross_entropy_inputs(logits.value(), targets, mask);
    return scale(nll_sum(logits, targets, mask), 1.0 / static_cast<double>(count));
}

} // namespace ag

} // namespace aya::numerics

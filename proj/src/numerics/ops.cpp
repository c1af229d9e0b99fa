#include "aya/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aya::numerics {

namespace kernels {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
             std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        const double* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = ai[p];
            if (s == 0.0) {
                continue;
            }
            const double* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                o[j] += s * bp[j];
            }
        }
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
             std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            out[i * n + j] += acc;
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t k,
             std::size_t m, std::size_t n)
{
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.data() + p * m;
        const double* bp = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double s = ap[i];
            if (s == 0.0) {
                continue;
            }
            double* o = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                o[j] += s * bp[j];
            }
        }
    }
}

} // namespace kernels

namespace {

DType promote(const Tensor& a, const Tensor& b)
{
    return (a.dtype() == DType::f64 || b.dtype() == DType::f64) ? DType::f64 : DType::f32;
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor out({a.rows(), b.cols()}, promote(a, b));
    kernels::gemm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
    out.settle("matmul");
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b)
{
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions " + shape_string(a.shape()) + " x "
                         + shape_string(b.shape()) + "^T");
    }
    Tensor out({a.rows(), b.rows()}, promote(a, b));
    kernels::gemm_nt(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.rows());
    out.settle("matmul_nt");
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b)
{
    require_rank(a, 2, "matmul_tn");
    require_rank(b, 2, "matmul_tn");
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: inner dimensions " + shape_string(a.shape()) + "^T x "
                         + shape_string(b.shape()));
    }
    Tensor out({a.cols(), b.cols()}, promote(a, b));
    kernels::gemm_tn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
    out.settle("matmul_tn");
    return out;
}

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    Tensor out(a.shape(), promote(a, b));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    out.settle("add");
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    Tensor out(a.shape(), promote(a, b));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    out.settle("mul");
    return out;
}

Tensor scale(const Tensor& a, double s)
{
    Tensor out = a;
    for (double& x : out.data()) {
        x *= s;
    }
    out.settle("scale");
    return out;
}

double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double swish(double z)
{
    return z * sigmoid(z);
}

Tensor swish(const Tensor& x)
{
    Tensor out = x;
    for (double& v : out.data()) {
        v = swish(v);
    }
    out.settle("swish");
    return out;
}

Tensor softmax(const Tensor& x, int axis)
{
    const int rank = static_cast<int>(x.rank());
    if (rank == 0) {
        return x;
    }
    const int ax = axis < 0 ? rank + axis : axis;
    if (ax < 0 || ax >= rank) {
        throw ShapeError("softmax: axis out of range for shape " + shape_string(x.shape()));
    }
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (int i = 0; i < ax; ++i) {
        outer *= x.shape()[static_cast<std::size_t>(i)];
    }
    for (int i = ax + 1; i < rank; ++i) {
        inner *= x.shape()[static_cast<std::size_t>(i)];
    }
    const std::size_t len = x.shape()[static_cast<std::size_t>(ax)];
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double max_v = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < len; ++i) {
                max_v = std::max(max_v, x[base + i * inner]);
            }
            double total = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const double e = std::exp(x[base + i * inner] - max_v);
                out[base + i * inner] = e;
                total += e;
            }
            for (std::size_t i = 0; i < len; ++i) {
                out[base + i * inner] /= total;
            }
        }
    }
    out.settle("softmax");
    return out;
}

Tensor log_softmax_rows(const Tensor& x)
{
    require_rank(x, 2, "log_softmax_rows");
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        const double max_v = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (double v : in) {
            total += std::exp(v - max_v);
        }
        const double log_z = max_v + std::log(total);
        auto o = out.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) {
            o[c] = in[c] - log_z;
        }
    }
    out.settle("log_softmax");
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, double eps)
{
    if (x.rank() == 0 || gain.rank() != 1 || x.shape().back() != gain.size()) {
        throw ShapeError("layer_norm: gain " + shape_string(gain.shape()) + " does not match input "
                         + shape_string(x.shape()));
    }
    const std::size_t d = gain.size();
    const std::size_t n = x.size() / d;
    Tensor out(x.shape(), promote(x, gain));
    for (std::size_t r = 0; r < n; ++r) {
        const auto in = x.row(r);
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
        auto o = out.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            o[c] = (in[c] - mean) * inv_std * gain[c];
        }
    }
    out.settle("layer_norm");
    return out;
}

std::size_t check_cross_entropy_inputs(const Tensor& logits, std::span<const TokenId> targets,
                                       std::span<const double> mask)
{
    require_rank(logits, 2, "cross_entropy");
    if (targets.size() != logits.rows() || mask.size() != logits.rows()) {
        throw ShapeError("cross_entropy: " + std::to_string(logits.rows()) + " logit rows, "
                         + std::to_string(targets.size()) + " targets, " + std::to_string(mask.size())
                         + " mask entries");
    }
    std::size_t count = 0;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (mask[t] != 0.0 && mask[t] != 1.0) {
            throw InputError("bad_mask", "cross_entropy: mask values must be 0 or 1");
        }
        if (mask[t] == 1.0) {
            if (targets[t] >= logits.cols()) {
                throw InputError("token_out_of_range", "cross_entropy: target id " + std::to_string(targets[t])
                                                           + " >= vocab " + std::to_string(logits.cols()));
            }
            ++count;
        }
    }
    if (count == 0) {
        throw InputError("all_zero_mask", "cross_entropy: mask selects no positions");
    }
    return count;
}

double cross_entropy(const Tensor& logits, std::span<const TokenId> targets, std::span<const double> mask)
{
    const std::size_t count = check_cross_entropy_inputs(logits, targets, mask);
    const Tensor logp = log_softmax_rows(logits);
    double total = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (mask[t] == 1.0) {
            total -= logp.at(t, targets[t]);
        }
    }
    return total / static_cast<double>(count);
}

} // namespace aya::numerics

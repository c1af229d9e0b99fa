#pragma once

#include "aya/numerics/tensor.hpp"

#include <cstdint>
#include <span>

namespace aya::numerics {

using TokenId = std::uint32_t;

// a[m,k] . b[k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m,k] . b[n,k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a[k,m]^T . b[k,n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double sigmoid(double z);
double swish(double z);
Tensor swish(const Tensor& x);

// Softmax along `axis` (negative counts from the end), max-subtracted.
Tensor softmax(const Tensor& x, int axis = -1);
// Per-row log-softmax of a rank-2 tensor.
Tensor log_softmax_rows(const Tensor& x);

inline constexpr double default_norm_eps = 1e-5;

// Normalizes each trailing-dimension vector to zero mean and unit variance and
// scales by `gain`. There is no additive bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, double eps = default_norm_eps);

// Mean negative log-likelihood over positions where mask == 1.
double cross_entropy(const Tensor& logits, std::span<const TokenId> targets, std::span<const double> mask);

// Validation shared by the plain and autograd cross-entropy paths; returns the
// number of masked-in positions.
std::size_t check_cross_entropy_inputs(const Tensor& logits, std::span<const TokenId> targets,
                                       std::span<const double> mask);

namespace kernels {
// out[m,n] += a[m,k] . b[k,n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
             std::size_t k, std::size_t n);
// out[m,n] += a[m,k] . b[n,k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
             std::size_t k, std::size_t n);
// out[m,n] += a[k,m]^T . b[k,n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t k,
             std::size_t m, std::size_t n);
} // namespace kernels

} // namespace aya::numerics

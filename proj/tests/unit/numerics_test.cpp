#include "aya/numerics/autograd.hpp"
#include "aya/numerics/grad_check.hpp"
#include "aya/numerics/ops.hpp"
#include "aya/numerics/rng.hpp"
#include "aya/numerics/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

using namespace aya::numerics;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, DType dtype = DType::f64)
{
    Rng rng(seed);
    std::vector<double> v(element_count(shape));
    for (double& x : v) {
        x = rng.uniform() * 2.0 - 1.0;
    }
    return Tensor(std::move(shape), std::move(v), dtype);
}

// Reference product, written independently of the kernels.
Tensor triple_loop(const Tensor& a, const Tensor& b)
{
    Tensor out({a.rows(), b.cols()}, DType::f64);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) {
                acc += a.at(i, p) * b.at(p, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

} // namespace

TEST(Tensor, RejectsMismatchedValueCount)
{
    EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Tensor, NonFiniteIsSurfaced)
{
    EXPECT_THROW(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}), NumericError);
    Tensor big({1}, {1e308}, DType::f64);
    EXPECT_THROW(scale(big, 10.0), NumericError);
}

TEST(Tensor, F32ValuesAreFloatRepresentable)
{
    Tensor t({1}, {0.1}, DType::f32);
    EXPECT_EQ(t[0], static_cast<double>(0.1f));
    Tensor d({1}, {0.1}, DType::f64);
    EXPECT_EQ(d[0], 0.1);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged)
{
    Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, DType::f64);
    Tensor a = random_tensor({3, 4}, 7);
    EXPECT_EQ(matmul(eye, a), a);
}

TEST(Matmul, HandArithmetic)
{
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {0, 1});
    Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{2, 1}));
    EXPECT_EQ(c[0], 2.0);
    EXPECT_EQ(c[1], 4.0);
}

TEST(Matmul, MatchesTripleLoopExactlyInF64)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Tensor a = random_tensor({3, 4}, seed);
        Tensor b = random_tensor({4, 5}, seed + 100);
        EXPECT_EQ(matmul(a, b), triple_loop(a, b)) << "seed " << seed;
    }
}

TEST(Matmul, TransposedVariantsAgreeWithPlainProduct)
{
    Tensor a = random_tensor({3, 4}, 1);
    Tensor b = random_tensor({5, 4}, 2);
    Tensor bt({4, 5}, DType::f64);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            bt.at(j, i) = b.at(i, j);
        }
    }
    Tensor nt = matmul_nt(a, b);
    Tensor ref = triple_loop(a, bt);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(nt[i], ref[i], 1e-15);
    }
}

TEST(Matmul, InnerDimensionMismatchThrows)
{
    EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Softmax, UniformInputGivesUniformOutput)
{
    Tensor s = softmax(Tensor({3}, {0, 0, 0}, DType::f64));
    for (double p : s.data()) {
        EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
    }
}

TEST(Softmax, ShiftInvariant)
{
    Tensor x = random_tensor({4, 6}, 3);
    for (double c : {-50.0, 0.5, 123.0}) {
        Tensor shifted = x;
        for (double& v : shifted.data()) {
            v += c;
        }
        Tensor a = softmax(x);
        Tensor b = softmax(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i], b[i], 1e-12);
        }
    }
}

TEST(Softmax, LargeLogitsDoNotOverflow)
{
    Tensor s = softmax(Tensor({2}, {1000, 0}, DType::f64));
    EXPECT_DOUBLE_EQ(s[0], 1.0);
    EXPECT_NEAR(s[1], 0.0, 1e-300);
}

TEST(Softmax, RowsSumToOneAlongEitherAxis)
{
    Tensor x = random_tensor({5, 7}, 4, DType::f32);
    for (int axis : {0, 1, -1}) {
        Tensor s = softmax(x, axis);
        const std::size_t outer = axis == 0 ? 7 : 5;
        const std::size_t len = axis == 0 ? 5 : 7;
        for (std::size_t o = 0; o < outer; ++o) {
            double total = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                total += axis == 0 ? s.at(i, o) : s.at(o, i);
            }
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
    }
}

TEST(LayerNorm, ZeroInputGivesZero)
{
    Tensor gain({4}, {0.5, 2, 3, -1}, DType::f64);
    Tensor y = layer_norm(Tensor({2, 4}, DType::f64), gain);
    for (double v : y.data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(LayerNorm, NormalizedInputPassesThrough)
{
    Tensor y = layer_norm(Tensor({2}, {1, -1}, DType::f64), Tensor({2}, {1, 1}, DType::f64));
    EXPECT_NEAR(y[0], 1.0, 1e-5);
    EXPECT_NEAR(y[1], -1.0, 1e-5);
}

TEST(LayerNorm, ZeroMeanUnitVarianceBeforeGain)
{
    Tensor x = random_tensor({8, 16}, 11);
    Tensor ones({16}, DType::f64);
    ones.fill(1.0);
    Tensor y = layer_norm(x, ones);
    for (std::size_t r = 0; r < 8; ++r) {
        double mean = 0.0;
        double sq = 0.0;
        for (double v : y.row(r)) {
            mean += v;
            sq += v * v;
        }
        mean /= 16.0;
        EXPECT_NEAR(mean, 0.0, 1e-5);
        EXPECT_NEAR(sq / 16.0 - mean * mean, 1.0, 1e-3);
    }
}

TEST(LayerNorm, GainLengthMismatchThrows)
{
    EXPECT_THROW(layer_norm(Tensor({2, 4}), Tensor({3})), ShapeError);
}

TEST(CrossEntropy, ConfidentCorrectLogitsApproachZero)
{
    Tensor logits({2, 3}, {100, 0, 0, 0, 0, 100}, DType::f64);
    std::vector<TokenId> targets{0, 2};
    std::vector<double> mask{1, 1};
    EXPECT_NEAR(cross_entropy(logits, targets, mask), 0.0, 1e-30);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab)
{
    const std::size_t vocab = 37;
    Tensor logits({4, vocab}, DType::f64);
    std::vector<TokenId> targets{0, 5, 9, 36};
    std::vector<double> mask{1, 1, 1, 1};
    EXPECT_NEAR(cross_entropy(logits, targets, mask), std::log(37.0), 1e-12);
}

TEST(CrossEntropy, MaskedPositionsDoNotMatter)
{
    Tensor logits = random_tensor({3, 5}, 9);
    std::vector<double> mask{1, 0, 1};
    std::vector<TokenId> a{1, 2, 3};
    std::vector<TokenId> b{1, 4, 3};
    EXPECT_EQ(cross_entropy(logits, a, mask), cross_entropy(logits, b, mask));
}

TEST(CrossEntropy, AllZeroMaskIsAnError)
{
    std::vector<TokenId> targets{0};
    std::vector<double> mask{0};
    try {
        cross_entropy(Tensor({1, 2}), targets, mask);
        FAIL() << "expected an error";
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "all_zero_mask");
    }
}

TEST(Rng, SameSeedSameStream)
{
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.next_u64(), b.next_u64());
    }
}

TEST(Rng, PinnedIntegerStream)
{
    // Integer-only arithmetic: these values must hold on every platform.
    Rng rng(2024, 3);
    const std::uint64_t first = rng.next_u64();
    const std::uint64_t second = rng.next_u64();
    Rng again(RngState{2024, 3, 0});
    EXPECT_EQ(again.next_u64(), first);
    EXPECT_EQ(again.next_u64(), second);
    EXPECT_EQ(mix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, SplitDoesNotAdvanceParentAndStreamsDiffer)
{
    Rng parent(5);
    Rng c1 = parent.split(1);
    Rng c2 = parent.split(2);
    EXPECT_EQ(parent.state().counter, 0u);
    EXPECT_NE(c1.next_u64(), c2.next_u64());
    EXPECT_EQ(parent.split(1).next_u64(), Rng(parent.split(1).state()).next_u64());
}

TEST(Rng, UniformAndBelowStayInRange)
{
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(rng.below(7), 7u);
    }
}

TEST(Rng, TruncatedNormalRespectsBound)
{
    Rng rng(10);
    double sq = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double z = rng.truncated_normal(0.02);
        EXPECT_LE(std::abs(z), 0.04);
        sq += z * z;
    }
    // Variance of a 2-sigma truncated normal is about 0.774 sigma^2.
    EXPECT_NEAR(std::sqrt(sq / 20000.0), 0.02 * std::sqrt(0.774), 0.0005);
}

TEST(GradCheck, LinearFunctionIsExact)
{
    Parameter w("w", random_tensor({5}, 12));
    const Tensor c = random_tensor({5}, 13);
    std::vector<Parameter*> params{&w};
    auto result = grad_check([&] { return ag::sum(ag::mul(leaf(w), constant(c))); }, params);
    EXPECT_LT(result.max_relative_error, 1e-8);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(w.grad[i], c[i]);
    }
}

TEST(GradCheck, ConstantFunctionHasZeroGradient)
{
    Parameter w("w", random_tensor({3, 2}, 14));
    std::vector<Parameter*> params{&w};
    const Tensor k = random_tensor({1}, 15);
    auto result = grad_check([&] { return constant(k); }, params);
    EXPECT_EQ(result.max_relative_error, 0.0);
    for (double g : w.grad.data()) {
        EXPECT_EQ(g, 0.0);
    }
}

TEST(GradCheck, TwoLayerToyModel)
{
    Parameter w1("w1", random_tensor({4, 6}, 16));
    Parameter w2("w2", random_tensor({6, 5}, 17));
    Parameter gain("gain", random_tensor({4}, 18));
    Parameter table("table", random_tensor({5, 4}, 19));
    std::vector<Parameter*> params{&w1, &w2, &gain, &table};
    const std::vector<TokenId> ids{0, 3, 1};
    const std::vector<TokenId> targets{3, 1, 4};
    const std::vector<double> mask{1, 0, 1};
    auto loss = [&] {
        Var x = ag::embedding(leaf(table), ids);
        Var h = ag::swish(ag::matmul(ag::layer_norm(x, leaf(gain)), leaf(w1)));
        Var logits = ag::add(ag::matmul(h, leaf(w2)), ag::matmul_nt(x, leaf(table)));
        return ag::cross_entropy(logits, targets, mask);
    };
    auto result = grad_check(loss, params, 1e-5);
    EXPECT_LT(result.max_relative_error, 1e-4) << result.worst_parameter << "[" << result.worst_index << "]";
    EXPECT_EQ(result.checked, 24u + 30u + 4u + 20u);
}

TEST(GradCheck, RejectsF32Parameters)
{
    Parameter w("w", Tensor({2}, DType::f32));
    std::vector<Parameter*> params{&w};
    EXPECT_THROW(grad_check([&] { return ag::sum(leaf(w)); }, params), aya::InputError);
}

TEST(Autograd, GradientsAccumulateAcrossUses)
{
    Parameter w("w", Tensor({2}, {1.0, 2.0}, DType::f64));
    Var a = leaf(w);
    backward(ag::sum(ag::mul(a, a)));
    EXPECT_DOUBLE_EQ(w.grad[0], 2.0);
    EXPECT_DOUBLE_EQ(w.grad[1], 4.0);
}

TEST(Autograd, UntrackedGraphRecordsNothing)
{
    Parameter w("w", Tensor({2}, {1.0, 2.0}, DType::f64));
    Var out = ag::sum(ag::scale(leaf(w, false), 3.0));
    EXPECT_FALSE(out.requires_grad());
    backward(out);
    EXPECT_EQ(w.grad[0], 0.0);
}

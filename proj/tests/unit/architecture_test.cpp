#include "aya/architecture/config.hpp"
#include "aya/architecture/model.hpp"
#include "aya/architecture/weights.hpp"
#include "aya/numerics/grad_check.hpp"
#include "aya/numerics/ops.hpp"
#include "aya/numerics/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace aya::architecture;
using aya::numerics::Rng;
using aya::numerics::Shape;
namespace ag = aya::numerics::ag;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0)
{
    Rng rng(seed);
    std::vector<double> v(aya::numerics::element_count(shape));
    for (double& x : v) {
        x = (rng.uniform() * 2.0 - 1.0) * scale;
    }
    return Tensor(std::move(shape), std::move(v), DType::f64);
}

std::vector<std::size_t> iota_positions(std::size_t n, std::size_t start = 0)
{
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), start);
    return p;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

// Textbook causal multi-head attention: every query head has its own K/V head.
Tensor mha_reference(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, std::size_t dh)
{
    const std::size_t T = q.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out({T, heads * dh}, DType::f64);
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < T; ++i) {
            std::vector<double> s(i + 1);
            double m = -INFINITY;
            for (std::size_t j = 0; j <= i; ++j) {
                s[j] = dot(q.row(i).subspan(h * dh, dh), k.row(j).subspan(h * dh, dh)) * scale;
                m = std::max(m, s[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                s[j] = std::exp(s[j] - m);
                z += s[j];
            }
            for (std::size_t j = 0; j <= i; ++j) {
                s[j] /= z;
                for (std::size_t c = 0; c < dh; ++c) {
                    out.at(i, h * dh + c) += s[j] * v.at(j, h * dh + c);
                }
            }
        }
    }
    return out;
}

ModelWeights random_weights(const ModelConfig& config, std::uint64_t seed, double scale = 0.5)
{
    ModelWeights w = zero_weights(config, DType::f64);
    std::uint64_t s = seed;
    for (Parameter* p : w.parameters()) {
        p->value = random_tensor(p->value.shape(), s++, scale);
        if (p->value.rank() == 1) {
            for (double& g : p->value.data()) {
                g += 1.0;
            }
        }
    }
    return w;
}

} // namespace

TEST(CountParameters, Aya8BShapeMatchesPublishedTotals)
{
    const ParamCount c = count_parameters(preset("aya-23-8b-shape"));
    EXPECT_EQ(c.embedding, 1'048'576'000u);
    EXPECT_EQ(c.non_embedding, 6'979'457'024u);
}

TEST(CountParameters, Aya35BShapeMatchesPublishedTotals)
{
    const ParamCount c = count_parameters(preset("aya-23-35b-shape"));
    EXPECT_EQ(c.embedding, 2'097'152'000u);
    EXPECT_EQ(c.non_embedding, 32'883'679'232u);
}

TEST(CountParameters, ToyConfigHandSum)
{
    // attn 16 + ffn 24 + two gains of 2
    const ParamCount c = count_parameters(preset("toy-tiny"));
    EXPECT_EQ(c.embedding, 4u);
    EXPECT_EQ(c.non_embedding, 44u);
}

TEST(CountParameters, MatchesAllocatedWeights)
{
    for (const char* name : {"toy-tiny", "toy-small", "toy-gradcheck"}) {
        ModelConfig c = preset(name);
        for (bool tied : {true, false}) {
            c.tie_embeddings = tied;
            EXPECT_EQ(count_parameters(c).total(), zero_weights(c).element_count()) << name << " tied=" << tied;
        }
    }
}

TEST(CountParameters, InvalidConfigRejected)
{
    ModelConfig c = preset("toy-small");
    c.n_kv_heads = 3;
    EXPECT_THROW(count_parameters(c), ConfigError);
    c = preset("toy-small");
    c.d_head = 7;
    EXPECT_THROW(count_parameters(c), ConfigError);
    c = preset("toy-small");
    c.n_layers = 0;
    EXPECT_THROW(count_parameters(c), ConfigError);
}

TEST(ScaleFfn, RoundsToMultiple)
{
    EXPECT_EQ(scale_ffn_for_swiglu(4096, 4.0, 256), 10'752u);
}

TEST(ScaleFfn, UnitRoundingIsPlainRounding)
{
    for (std::uint64_t d : {96u, 100u, 1024u, 4096u}) {
        for (double m : {1.0, 2.5, 4.0}) {
            EXPECT_EQ(scale_ffn_for_swiglu(d, m, 1),
                      static_cast<std::uint64_t>(std::llround(2.0 / 3.0 * m * static_cast<double>(d))));
        }
    }
}

TEST(ScaleFfn, ParameterParityWithTwoProjectionFfn)
{
    const double d = 1024;
    const double swiglu = 3.0 * d * static_cast<double>(scale_ffn_for_swiglu(1024, 4.0, 1));
    const double plain = 2.0 * d * (4.0 * d);
    EXPECT_LT(std::abs(swiglu - plain) / plain, 0.015);
}

TEST(Config, TextRoundTripAndOverrides)
{
    const ModelConfig c = preset("aya-23-8b-shape");
    EXPECT_EQ(parse_config_text(to_config_text(c)), c);

    const ModelConfig o = parse_config_text("preset = toy-small\nd_ffn = 96 # wider\n", {{"vocab_size", "300"}});
    EXPECT_EQ(o.d_ffn, 96u);
    EXPECT_EQ(o.vocab_size, 300u);
    EXPECT_EQ(o.d_model, 32u);
}

TEST(Config, PresetFilesMatchBuiltIns)
{
    for (const char* name : {"aya-23-8b-shape", "aya-23-35b-shape", "toy-tiny", "toy-small", "toy-gradcheck"}) {
        const auto path = std::string(AYA_SOURCE_DIR) + "/configs/" + name + ".cfg";
        EXPECT_EQ(load_config(path), preset(name)) << path;
    }
}

TEST(Config, UnknownKeyAndBadValueRejected)
{
    EXPECT_THROW(parse_config_text("preset = toy-small\nwidth = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_text("preset = toy-small\nd_model = many\n"), ConfigError);
    EXPECT_THROW(parse_config_text("preset = no-such-model\n"), ConfigError);
}

TEST(Rope, PositionZeroIsIdentity)
{
    Tensor x = random_tensor({1, 8}, 1);
    const std::vector<std::size_t> pos{0};
    EXPECT_EQ(rope_apply(x, pos, 10000.0), x);
}

TEST(Rope, PreservesNorm)
{
    Tensor x = random_tensor({513, 16}, 2);
    const auto pos = iota_positions(513);
    Tensor y = rope_apply(x, pos, 10000.0);
    for (std::size_t t = 0; t < 513; ++t) {
        EXPECT_NEAR(std::sqrt(dot(y.row(t), y.row(t))), std::sqrt(dot(x.row(t), x.row(t))), 1e-12);
    }
}

TEST(Rope, DotProductDependsOnlyOnOffset)
{
    Rng seeds(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q = random_tensor({1, 16}, seeds.next_u64());
        Tensor k = random_tensor({1, 16}, seeds.next_u64());
        for (std::size_t n = 0; n <= 16; ++n) {
            for (std::size_t m = n; m <= 16; ++m) {
                const std::vector<std::size_t> pm{m}, pn{n}, pd{m - n}, p0{0};
                const double lhs = dot(rope_apply(q, pm, 10000).row(0), rope_apply(k, pn, 10000).row(0));
                const double rhs = dot(rope_apply(q, pd, 10000).row(0), rope_apply(k, p0, 10000).row(0));
                EXPECT_NEAR(lhs, rhs, 1e-5);
            }
        }
    }
}

TEST(Rope, OddHeadSizeRejected)
{
    const std::vector<std::size_t> pos{0};
    EXPECT_THROW(rope_apply(Tensor({1, 3}), pos, 10000.0), aya::InputError);
}

TEST(Rope, RankThreeMatchesPerHeadRows)
{
    Tensor x = random_tensor({2, 3, 4}, 5);
    const auto pos = iota_positions(3, 7);
    Tensor y = rope_apply(x, pos, 500.0);
    for (std::size_t h = 0; h < 2; ++h) {
        Tensor slice({3, 4}, std::vector<double>(x.data().begin() + h * 12, x.data().begin() + (h + 1) * 12), DType::f64);
        Tensor ys = rope_apply(slice, pos, 500.0);
        for (std::size_t i = 0; i < 12; ++i) {
            EXPECT_EQ(ys[i], y[h * 12 + i]);
        }
    }
}

TEST(GroupedAttention, FullKvHeadsIsBitEqualToMultiHead)
{
    const std::size_t T = 9, H = 4, dh = 6;
    Tensor q = random_tensor({T, H * dh}, 10);
    Tensor k = random_tensor({T, H * dh}, 11);
    Tensor v = random_tensor({T, H * dh}, 12);
    Var out = grouped_attention(aya::numerics::constant(q), aya::numerics::constant(k), aya::numerics::constant(v),
                                {H, H, dh});
    EXPECT_EQ(out.value(), mha_reference(q, k, v, H, dh));
}

TEST(GroupedAttention, SingleKvHeadMatchesBroadcastOracle)
{
    const std::size_t T = 7, H = 4, dh = 4;
    Tensor q = random_tensor({T, H * dh}, 20);
    Tensor k = random_tensor({T, dh}, 21);
    Tensor v = random_tensor({T, dh}, 22);
    // Explicitly replicate the single K/V head for every query head.
    Tensor kb({T, H * dh}, DType::f64);
    Tensor vb({T, H * dh}, DType::f64);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < dh; ++c) {
                kb.at(t, h * dh + c) = k.at(t, c);
                vb.at(t, h * dh + c) = v.at(t, c);
            }
        }
    }
    Var out = grouped_attention(aya::numerics::constant(q), aya::numerics::constant(k), aya::numerics::constant(v),
                                {H, 1, dh});
    EXPECT_EQ(out.value(), mha_reference(q, kb, vb, H, dh));
}

TEST(GroupedAttention, GroupsReadTheirOwnKvHead)
{
    const std::size_t T = 5, H = 4, G = 2, dh = 2;
    Tensor q = random_tensor({T, H * dh}, 30);
    Tensor k = random_tensor({T, G * dh}, 31);
    Tensor v = random_tensor({T, G * dh}, 32);
    Tensor kb({T, H * dh}, DType::f64);
    Tensor vb({T, H * dh}, DType::f64);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < dh; ++c) {
                kb.at(t, h * dh + c) = k.at(t, (h / 2) * dh + c);
                vb.at(t, h * dh + c) = v.at(t, (h / 2) * dh + c);
            }
        }
    }
    Var out = grouped_attention(aya::numerics::constant(q), aya::numerics::constant(k), aya::numerics::constant(v),
                                {H, G, dh});
    EXPECT_EQ(out.value(), mha_reference(q, kb, vb, H, dh));
}

TEST(GqaAttention, SinglePositionReturnsValueThroughWo)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights w = random_weights(c, 40);
    Tensor x = random_tensor({1, c.d_model}, 41);
    const auto pos = iota_positions(1);
    Var out = gqa_attention(aya::numerics::constant(x), w.layers[0], c, {pos});
    // Each query head h copies V head h / group; then Wo.
    Tensor vrow = aya::numerics::matmul(x, w.layers[0].wv.value);
    Tensor expanded({1, c.q_width()}, DType::f64);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
        for (std::size_t d = 0; d < c.d_head; ++d) {
            expanded[h * c.d_head + d] = vrow[(h / c.heads_per_kv()) * c.d_head + d];
        }
    }
    Tensor expected = aya::numerics::matmul(expanded, w.layers[0].wo.value);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_NEAR(out.value()[i], expected[i], 1e-12);
    }
}

TEST(Swiglu, ZeroInputGivesZero)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights w = random_weights(c, 50);
    Var out = swiglu_ffn(aya::numerics::constant(Tensor({3, c.d_model}, DType::f64)), w.layers[0]);
    for (double v : out.value().data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Swiglu, SwishScalarValues)
{
    EXPECT_NEAR(aya::numerics::swish(10.0), 9.99955, 5e-6);
    EXPECT_EQ(aya::numerics::swish(0.0), 0.0);
    EXPECT_NEAR(aya::numerics::swish(-1000.0), 0.0, 1e-300);
}

TEST(Swiglu, LargeNegativeGateSilencesOutput)
{
    ModelConfig c = preset("toy-tiny");
    ModelWeights w = zero_weights(c, DType::f64);
    auto& l = w.layers[0];
    l.w_gate.value.fill(-500.0);
    l.w_up.value.fill(1.0);
    l.w_down.value.fill(1.0);
    Var out = swiglu_ffn(aya::numerics::constant(Tensor({1, 2}, {1.0, 1.0}, DType::f64)), l);
    for (double v : out.value().data()) {
        EXPECT_NEAR(v, 0.0, 1e-200);
    }
}

TEST(DecoderLayer, ZeroOutputProjectionsGiveIdentity)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights w = random_weights(c, 60);
    w.layers[0].wo.value.fill(0.0);
    w.layers[0].w_down.value.fill(0.0);
    Tensor x = random_tensor({6, c.d_model}, 61);
    const auto pos = iota_positions(6);
    Var y = decoder_layer_forward(aya::numerics::constant(x), w.layers[0], c, {pos});
    EXPECT_EQ(y.value(), x);
}

TEST(DecoderLayer, ZeroInputGivesZero)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights w = random_weights(c, 62);
    const auto pos = iota_positions(4);
    Var y = decoder_layer_forward(aya::numerics::constant(Tensor({4, c.d_model}, DType::f64)), w.layers[0], c, {pos});
    for (double v : y.value().data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(DecoderLayer, ParallelDiffersFromSequentialComposition)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights w = random_weights(c, 63);
    Tensor x = random_tensor({5, c.d_model}, 64);
    const auto pos = iota_positions(5);
    const LayerContext ctx{pos};
    Var xv = aya::numerics::constant(x);
    Var parallel = decoder_layer_forward(xv, w.layers[0], c, ctx);
    // Sequential block: h = x + attn(norm(x)); y = h + ffn(norm(h)).
    Var h = ag::add(xv, gqa_attention(ag::layer_norm(xv, use(w.layers[0].input_gain, false)), w.layers[0], c, ctx));
    Var sequential = ag::add(h, swiglu_ffn(ag::layer_norm(h, use(w.layers[0].input_gain, false)), w.layers[0]));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(parallel.value()[i] - sequential.value()[i]));
    }
    EXPECT_GT(max_diff, 1e-6);
}

TEST(ModelForward, ToyModelMatchesHandComputation)
{
    // toy-tiny: vocab 2, d_model 2, one head of size 2, d_ffn 4, tied embeddings.
    const ModelConfig c = preset("toy-tiny");
    ModelWeights w = zero_weights(c, DType::f64);
    w.token_embedding.value = Tensor({2, 2}, {1.0, -0.5, 0.25, 2.0}, DType::f64);
    auto& l = w.layers[0];
    l.input_gain.value = Tensor({2}, {1.5, 0.5}, DType::f64);
    l.wq.value = Tensor({2, 2}, {0.5, -1.0, 2.0, 0.25}, DType::f64);
    l.wk.value = Tensor({2, 2}, {1.0, 0.5, -0.5, 1.0}, DType::f64);
    l.wv.value = Tensor({2, 2}, {0.3, 0.7, -0.2, 0.4}, DType::f64);
    l.wo.value = Tensor({2, 2}, {1.0, 0.0, 0.5, -1.0}, DType::f64);
    l.w_gate.value = Tensor({2, 4}, {0.1, 0.2, 0.3, 0.4, -0.5, 0.6, -0.7, 0.8}, DType::f64);
    l.w_up.value = Tensor({2, 4}, {1.0, -1.0, 0.5, 0.0, 0.25, 0.75, -0.5, 1.0}, DType::f64);
    l.w_down.value = Tensor({4, 2}, {0.2, -0.1, 0.0, 0.3, 0.4, 0.4, -0.6, 0.1}, DType::f64);
    w.final_gain.value = Tensor({2}, {2.0, 1.0}, DType::f64);

    const std::vector<TokenId> tokens{0, 1};
    Tensor logits = model_forward(c, w, tokens);

    // Scalar spreadsheet: every step spelled out for d = 2.
    const double eps = 1e-5;
    auto norm2 = [&](double a, double b, double g0, double g1, double out[2]) {
        const double m = (a + b) / 2;
        const double var = ((a - m) * (a - m) + (b - m) * (b - m)) / 2;
        const double inv = 1.0 / std::sqrt(var + eps);
        out[0] = (a - m) * inv * g0;
        out[1] = (b - m) * inv * g1;
    };
    const double E[2][2] = {{1.0, -0.5}, {0.25, 2.0}};
    double x[2][2] = {{E[0][0], E[0][1]}, {E[1][0], E[1][1]}};
    double n[2][2], q[2][2], k[2][2], v[2][2];
    for (int t = 0; t < 2; ++t) {
        norm2(x[t][0], x[t][1], 1.5, 0.5, n[t]);
        q[t][0] = n[t][0] * 0.5 + n[t][1] * 2.0;
        q[t][1] = n[t][0] * -1.0 + n[t][1] * 0.25;
        k[t][0] = n[t][0] * 1.0 + n[t][1] * -0.5;
        k[t][1] = n[t][0] * 0.5 + n[t][1] * 1.0;
        v[t][0] = n[t][0] * 0.3 + n[t][1] * -0.2;
        v[t][1] = n[t][0] * 0.7 + n[t][1] * 0.4;
        // RoPE with d_head 2: one pair rotated by angle = position.
        const double cs = std::cos(static_cast<double>(t));
        const double sn = std::sin(static_cast<double>(t));
        const double q0 = q[t][0], q1 = q[t][1], k0 = k[t][0], k1 = k[t][1];
        q[t][0] = q0 * cs - q1 * sn;
        q[t][1] = q0 * sn + q1 * cs;
        k[t][0] = k0 * cs - k1 * sn;
        k[t][1] = k0 * sn + k1 * cs;
    }
    double attn[2][2];
    attn[0][0] = v[0][0];
    attn[0][1] = v[0][1];
    {
        const double s0 = (q[1][0] * k[0][0] + q[1][1] * k[0][1]) / std::sqrt(2.0);
        const double s1 = (q[1][0] * k[1][0] + q[1][1] * k[1][1]) / std::sqrt(2.0);
        const double e0 = std::exp(s0), e1 = std::exp(s1);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        attn[1][0] = p0 * v[0][0] + p1 * v[1][0];
        attn[1][1] = p0 * v[0][1] + p1 * v[1][1];
    }
    const double G[2][4] = {{0.1, 0.2, 0.3, 0.4}, {-0.5, 0.6, -0.7, 0.8}};
    const double U[2][4] = {{1.0, -1.0, 0.5, 0.0}, {0.25, 0.75, -0.5, 1.0}};
    const double D[4][2] = {{0.2, -0.1}, {0.0, 0.3}, {0.4, 0.4}, {-0.6, 0.1}};
    for (int t = 0; t < 2; ++t) {
        const double o0 = attn[t][0] * 1.0 + attn[t][1] * 0.5;
        const double o1 = attn[t][0] * 0.0 + attn[t][1] * -1.0;
        double f[2] = {0, 0};
        for (int j = 0; j < 4; ++j) {
            const double gz = n[t][0] * G[0][j] + n[t][1] * G[1][j];
            const double uz = n[t][0] * U[0][j] + n[t][1] * U[1][j];
            const double hidden = gz / (1.0 + std::exp(-gz)) * uz;
            f[0] += hidden * D[j][0];
            f[1] += hidden * D[j][1];
        }
        const double y0 = x[t][0] + o0 + f[0];
        const double y1 = x[t][1] + o1 + f[1];
        double fin[2];
        norm2(y0, y1, 2.0, 1.0, fin);
        for (int vtok = 0; vtok < 2; ++vtok) {
            const double expected = fin[0] * E[vtok][0] + fin[1] * E[vtok][1];
            EXPECT_NEAR(logits.at(t, vtok), expected, 1e-12) << "t=" << t << " v=" << vtok;
        }
    }
}

TEST(ModelForward, LogitsShapeIsSequenceByVocab)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 40;
    ModelWeights w = initialize_weights(c, 1);
    for (std::size_t T : {1u, 3u, 17u}) {
        std::vector<TokenId> tokens(T, 5);
        EXPECT_EQ(model_forward(c, w, tokens).shape(), (Shape{T, 40}));
    }
}

TEST(ModelForward, PerturbingATokenOnlyAffectsLaterPositions)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 30;
    ModelWeights w = initialize_weights(c, 2, DType::f64);
    std::vector<TokenId> tokens{1, 2, 3, 4, 5, 6, 7, 8};
    const Tensor base = model_forward(c, w, tokens);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto changed = tokens;
        changed[t] = 29;
        const Tensor out = model_forward(c, w, changed);
        for (std::size_t r = 0; r < tokens.size(); ++r) {
            double diff = 0.0;
            for (std::size_t v = 0; v < 30; ++v) {
                diff = std::max(diff, std::abs(out.at(r, v) - base.at(r, v)));
            }
            if (r < t) {
                EXPECT_EQ(diff, 0.0) << "row " << r << " perturbed " << t;
            } else {
                EXPECT_GT(diff, 0.0) << "row " << r << " perturbed " << t;
            }
        }
    }
}

TEST(ModelForward, PrefixLogitsEqualFullSequenceRows)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 25;
    ModelWeights w = initialize_weights(c, 3);
    std::vector<TokenId> tokens{3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
    const Tensor full = model_forward(c, w, tokens);
    for (std::size_t n = 1; n <= tokens.size(); ++n) {
        const Tensor prefix = model_forward(c, w, std::span(tokens).first(n));
        for (std::size_t i = 0; i < prefix.size(); ++i) {
            EXPECT_EQ(prefix[i], full[i]);
        }
    }
}

TEST(ModelForward, OutOfRangeTokenRejected)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 10;
    ModelWeights w = initialize_weights(c, 4);
    std::vector<TokenId> tokens{1, 10};
    try {
        model_forward(c, w, tokens);
        FAIL();
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "token_out_of_range");
    }
}

TEST(ModelForward, UntiedHeadUsesSeparateProjection)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 12;
    c.tie_embeddings = false;
    ModelWeights w = initialize_weights(c, 5);
    ASSERT_TRUE(w.output_projection.has_value());
    std::vector<TokenId> tokens{1, 2};
    const Tensor a = model_forward(c, w, tokens);
    w.output_projection->value.fill(0.0);
    const Tensor b = model_forward(c, w, tokens);
    for (double v : b.data()) {
        EXPECT_EQ(v, 0.0);
    }
    EXPECT_NE(a, b);
}

TEST(ModelForward, GradientsPassFiniteDifferenceCheck)
{
    const ModelConfig c = preset("toy-gradcheck");
    ModelWeights w = random_weights(c, 70, 0.4);
    const std::vector<TokenId> tokens{1, 5, 2, 9, 3, 10};
    const std::vector<TokenId> targets{5, 2, 9, 3, 10, 0};
    const std::vector<double> mask{0, 1, 1, 0, 1, 1};
    auto params = w.parameters();
    ForwardOptions opts;
    opts.track_grad = true;
    auto result = aya::numerics::grad_check(
        [&] { return ag::cross_entropy(forward(c, w, tokens, opts), targets, mask); }, params, 1e-5);
    EXPECT_LT(result.max_relative_error, 1e-4) << result.worst_parameter << "[" << result.worst_index << "]";
}

TEST(ModelForward, SegmentMaskingIsolatesDocuments)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = 20;
    ModelWeights w = initialize_weights(c, 6, DType::f64);
    const std::vector<TokenId> a{1, 2, 3};
    const std::vector<TokenId> b{4, 5};
    std::vector<TokenId> packed{4, 5, 1, 2, 3};
    const std::vector<std::int32_t> segments{0, 0, 1, 1, 1};
    ForwardOptions opts;
    opts.segments = segments;
    const Tensor joint = forward(c, w, packed, opts).value();
    const Tensor alone_a = model_forward(c, w, a);
    const Tensor alone_b = model_forward(c, w, b);
    for (std::size_t v = 0; v < 20; ++v) {
        EXPECT_NEAR(joint.at(0, v), alone_b.at(0, v), 1e-12);
        EXPECT_NEAR(joint.at(1, v), alone_b.at(1, v), 1e-12);
        for (std::size_t t = 0; t < 3; ++t) {
            EXPECT_NEAR(joint.at(2 + t, v), alone_a.at(t, v), 1e-12);
        }
    }
}

TEST(Weights, InitializationIsSeededAndScaled)
{
    const ModelConfig c = preset("toy-small");
    ModelWeights a = initialize_weights(c, 9);
    ModelWeights b = initialize_weights(c, 9);
    ModelWeights other = initialize_weights(c, 10);
    EXPECT_EQ(a.token_embedding.value, b.token_embedding.value);
    EXPECT_NE(a.token_embedding.value, other.token_embedding.value);
    for (double g : a.final_gain.value.data()) {
        EXPECT_EQ(g, 1.0);
    }
    const double residual_bound = 0.04 / std::sqrt(2.0 * 2.0);
    for (double v : a.layers[1].wo.value.data()) {
        EXPECT_LE(std::abs(v), residual_bound + 1e-9);
    }
    for (double v : a.layers[1].wq.value.data()) {
        EXPECT_LE(std::abs(v), 0.04 + 1e-9);
    }
    EXPECT_NO_THROW(check_weights(c, a));
    ModelConfig wrong = c;
    wrong.d_ffn = 32;
    EXPECT_THROW(check_weights(wrong, a), ConfigError);
}

TEST(KvCache, StoresOnlyKvHeads)
{
    const ModelConfig c = preset("aya-23-8b-shape");
    ModelConfig small = preset("toy-small");
    KvCache cache(small, 16);
    EXPECT_EQ(cache.key_store(0).shape(), (Shape{small.n_kv_heads, 16, small.d_head}));
    EXPECT_EQ(c.n_kv_heads, 8u);
}

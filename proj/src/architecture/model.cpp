#include "aya/architecture/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aya::architecture {

namespace ag = numerics::ag;

namespace {

// data is [rows, heads * d_head]; each row rotates by its own position.
void rotate_rows(std::span<double> data, std::size_t rows, std::size_t heads, std::size_t d_head,
                 std::span<const std::size_t> positions, double base, bool inverse)
{
    const std::size_t half = d_head / 2;
    std::vector<double> inv_freq(half);
    for (std::size_t i = 0; i < half; ++i) {
        inv_freq[i] = std::pow(base, -(2.0 * static_cast<double>(i)) / static_cast<double>(d_head));
    }
    for (std::size_t t = 0; t < rows; ++t) {
        const double pos = static_cast<double>(positions[t]);
        for (std::size_t i = 0; i < half; ++i) {
            const double angle = pos * inv_freq[i];
            const double c = std::cos(angle);
            const double s = inverse ? -std::sin(angle) : std::sin(angle);
            for (std::size_t h = 0; h < heads; ++h) {
                double* pair = data.data() + (t * heads + h) * d_head + 2 * i;
                const double x0 = pair[0];
                const double x1 = pair[1];
                pair[0] = x0 * c - x1 * s;
                pair[1] = x0 * s + x1 * c;
            }
        }
    }
}

void require_even_head(std::size_t d_head)
{
    if (d_head == 0 || d_head % 2 != 0) {
        throw InputError("odd_head_dim", "RoPE needs an even head size, got " + std::to_string(d_head));
    }
}

} // namespace

Tensor rope_apply(const Tensor& x, std::span<const std::size_t> positions, double base)
{
    if (x.rank() < 2) {
        throw numerics::ShapeError("rope_apply: expected [..., T, d_head], got " + numerics::shape_string(x.shape()));
    }
    const std::size_t d_head = x.shape().back();
    const std::size_t seq = x.shape()[x.rank() - 2];
    require_even_head(d_head);
    if (positions.size() != seq) {
        throw numerics::ShapeError("rope_apply: " + std::to_string(positions.size()) + " positions for sequence of "
                                   + std::to_string(seq));
    }
    Tensor out = x;
    const std::size_t blocks = x.size() / (seq * d_head);
    for (std::size_t b = 0; b < blocks; ++b) {
        rotate_rows(out.data().subspan(b * seq * d_head, seq * d_head), seq, 1, d_head, positions, base, false);
    }
    out.settle("rope_apply");
    return out;
}

Var rope(const Var& x, std::span<const std::size_t> positions, std::size_t n_heads, std::size_t d_head, double base)
{
    require_even_head(d_head);
    const Tensor& xv = x.value();
    numerics::require_rank(xv, 2, "rope");
    if (xv.cols() != n_heads * d_head || positions.size() != xv.rows()) {
        throw numerics::ShapeError("rope: input " + numerics::shape_string(xv.shape()) + " with "
                                   + std::to_string(positions.size()) + " positions and " + std::to_string(n_heads)
                                   + "x" + std::to_string(d_head) + " heads");
    }
    Tensor out = xv;
    rotate_rows(out.data(), xv.rows(), n_heads, d_head, positions, base, false);
    out.settle("rope");
    std::vector<std::size_t> pos(positions.begin(), positions.end());
    return numerics::make_result(std::move(out), {x},
                                 [pos = std::move(pos), n_heads, d_head, base](const Tensor& g, std::span<Var> p) {
                                     Tensor back = g;
                                     rotate_rows(back.data(), g.rows(), n_heads, d_head, pos, base, true);
                                     Tensor& dx = p[0].grad();
                                     for (std::size_t i = 0; i < back.size(); ++i) {
                                         dx[i] += back[i];
                                     }
                                 });
}

Var grouped_attention(const Var& q, const Var& k, const Var& v, const AttentionShape& shape, const AttentionMask& mask)
{
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    const std::size_t H = shape.n_heads;
    const std::size_t G = shape.n_kv_heads;
    const std::size_t dh = shape.d_head;
    if (G == 0 || H % G != 0) {
        throw InputError("invalid_config", "grouped_attention: n_heads must be a multiple of n_kv_heads");
    }
    numerics::require_rank(qv, 2, "grouped_attention");
    numerics::require_rank(kv, 2, "grouped_attention");
    numerics::require_same_shape(kv, vv, "grouped_attention");
    if (qv.cols() != H * dh || kv.cols() != G * dh) {
        throw numerics::ShapeError("grouped_attention: q " + numerics::shape_string(qv.shape()) + ", k "
                                   + numerics::shape_string(kv.shape()) + " do not match head layout");
    }
    const std::size_t Tq = qv.rows();
    const std::size_t Tk = kv.rows();
    if (Tq == 0) {
        throw InputError("empty_sequence", "grouped_attention: no query rows");
    }
    if (mask.query_offset + Tq > Tk) {
        throw numerics::ShapeError("grouped_attention: queries reach position " + std::to_string(mask.query_offset + Tq)
                                   + " but only " + std::to_string(Tk) + " keys exist");
    }
    const bool segmented = !mask.query_segments.empty();
    if (segmented && (mask.query_segments.size() != Tq || mask.key_segments.size() != Tk)) {
        throw numerics::ShapeError("grouped_attention: segment ids do not match sequence lengths");
    }
    const std::size_t group = H / G;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const auto allowed = [&](std::size_t i, std::size_t j) {
        return j <= mask.query_offset + i && (!segmented || mask.query_segments[i] == mask.key_segments[j]);
    };

    Tensor out({Tq, H * dh}, qv.dtype());
    // probs[h][i][j]; kept for the backward pass.
    std::vector<double> probs(H * Tq * Tk, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t g = h / group;
        for (std::size_t i = 0; i < Tq; ++i) {
            const double* qi = qv.row(i).data() + h * dh;
            double* pi = probs.data() + (h * Tq + i) * Tk;
            double max_s = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < Tk; ++j) {
                if (!allowed(i, j)) {
                    continue;
                }
                const double* kj = kv.row(j).data() + g * dh;
                double dot = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    dot += qi[c] * kj[c];
                }
                pi[j] = dot * scale;
                max_s = std::max(max_s, pi[j]);
            }
            double total = 0.0;
            for (std::size_t j = 0; j < Tk; ++j) {
                if (allowed(i, j)) {
                    pi[j] = std::exp(pi[j] - max_s);
                    total += pi[j];
                }
            }
            double* oi = out.row(i).data() + h * dh;
            for (std::size_t j = 0; j < Tk; ++j) {
                if (!allowed(i, j)) {
                    continue;
                }
                pi[j] /= total;
                const double* vj = vv.row(j).data() + g * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                    oi[c] += pi[j] * vj[c];
                }
            }
        }
    }
    out.settle("grouped_attention");

    return numerics::make_result(
        std::move(out), {q, k, v}, [probs = std::move(probs), H, group, dh, Tq, Tk, scale](const Tensor& g, std::span<Var> p) {
            const Tensor& qv = p[0].value();
            const Tensor& kv = p[1].value();
            const Tensor& vv = p[2].value();
            Tensor* dq = p[0].requires_grad() ? &p[0].grad() : nullptr;
            Tensor* dk = p[1].requires_grad() ? &p[1].grad() : nullptr;
            Tensor* dv = p[2].requires_grad() ? &p[2].grad() : nullptr;
            const std::size_t kw = kv.cols();
            std::vector<double> dp(Tk);
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t kvh = h / group;
                for (std::size_t i = 0; i < Tq; ++i) {
                    const double* pi = probs.data() + (h * Tq + i) * Tk;
                    const double* go = g.row(i).data() + h * dh;
                    double weighted = 0.0;
                    for (std::size_t j = 0; j < Tk; ++j) {
                        if (pi[j] == 0.0) {
                            dp[j] = 0.0;
                            continue;
                        }
                        const double* vj = vv.row(j).data() + kvh * dh;
                        double acc = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) {
                            acc += go[c] * vj[c];
                        }
                        dp[j] = acc;
                        weighted += pi[j] * acc;
                        if (dv) {
                            double* dvj = dv->data().data() + j * kw + kvh * dh;
                            for (std::size_t c = 0; c < dh; ++c) {
                                dvj[c] += pi[j] * go[c];
                            }
                        }
                    }
                    const double* qi = qv.row(i).data() + h * dh;
                    for (std::size_t j = 0; j < Tk; ++j) {
                        if (pi[j] == 0.0) {
                            continue;
                        }
                        const double ds = pi[j] * (dp[j] - weighted) * scale;
                        const double* kj = kv.row(j).data() + kvh * dh;
                        if (dq) {
                            double* dqi = dq->data().data() + i * qv.cols() + h * dh;
                            for (std::size_t c = 0; c < dh; ++c) {
                                dqi[c] += ds * kj[c];
                            }
                        }
                        if (dk) {
                            double* dkj = dk->data().data() + j * kw + kvh * dh;
                            for (std::size_t c = 0; c < dh; ++c) {
                                dkj[c] += ds * qi[c];
                            }
                        }
                    }
                }
            }
        });
}

Var use(const Parameter& parameter, bool track_grad)
{
    // Tracked leaves accumulate into parameter.grad; callers that track own
    // the weights mutably.
    return numerics::leaf(const_cast<Parameter&>(parameter), track_grad);
}

Var gqa_attention(const Var& normed, const LayerWeights& w, const ModelConfig& config, const LayerContext& ctx)
{
    const bool track = ctx.track_grad;
    Var q = ag::matmul(normed, use(w.wq, track));
    Var k = ag::matmul(normed, use(w.wk, track));
    Var v = ag::matmul(normed, use(w.wv, track));
    q = rope(q, ctx.positions, config.n_heads, config.d_head, config.rope_base);
    k = rope(k, ctx.positions, config.n_kv_heads, config.d_head, config.rope_base);

    const AttentionShape shape{config.n_heads, config.n_kv_heads, config.d_head};
    AttentionMask mask;
    mask.query_segments = ctx.segments;
    mask.key_segments = ctx.segments;
    Var attended;
    if (ctx.cache) {
        if (track) {
            throw InputError("cache_with_grad", "gradients do not flow through the KV cache");
        }
        const std::size_t pending = normed.value().rows();
        ctx.cache->write(ctx.layer, k.value(), v.value());
        mask.query_offset = ctx.cache->length();
        attended = grouped_attention(q, numerics::constant(ctx.cache->keys(ctx.layer, pending)),
                                     numerics::constant(ctx.cache->values(ctx.layer, pending)), shape, mask);
    } else {
        attended = grouped_attention(q, k, v, shape, mask);
    }
    return ag::matmul(attended, use(w.wo, track));
}

Var swiglu_ffn(const Var& x, const LayerWeights& w, bool track_grad)
{
    Var gate = ag::swish(ag::matmul(x, use(w.w_gate, track_grad)));
    Var up = ag::matmul(x, use(w.w_up, track_grad));
    return ag::matmul(ag::mul(gate, up), use(w.w_down, track_grad));
}

Var decoder_layer_forward(const Var& x, const LayerWeights& w, const ModelConfig& config, const LayerContext& ctx)
{
    Var normed = ag::layer_norm(x, use(w.input_gain, ctx.track_grad), config.norm_eps);
    Var attn = gqa_attention(normed, w, config, ctx);
    Var ffn = swiglu_ffn(normed, w, ctx.track_grad);
    return ag::add(ag::add(x, attn), ffn);
}

std::vector<std::size_t> segment_positions(std::span<const std::int32_t> segments)
{
    std::vector<std::size_t> pos(segments.size());
    std::size_t start = 0;
    for (std::size_t t = 0; t < segments.size(); ++t) {
        if (t > 0 && segments[t] != segments[t - 1]) {
            start = t;
        }
        pos[t] = t - start;
    }
    return pos;
}

Var forward(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens,
            const ForwardOptions& options)
{
    config.validate();
    if (tokens.empty()) {
        throw InputError("empty_sequence", "forward: no tokens");
    }
    if (!options.segments.empty() && options.segments.size() != tokens.size()) {
        throw numerics::ShapeError("forward: segment ids do not match token count");
    }
    if (options.cache && !options.segments.empty()) {
        throw InputError("cache_with_segments", "forward: segment masking is not supported with a KV cache");
    }
    std::vector<std::size_t> positions;
    if (!options.segments.empty()) {
        positions = segment_positions(options.segments);
    } else {
        const std::size_t offset = options.cache ? options.cache->length() : 0;
        positions.resize(tokens.size());
        std::iota(positions.begin(), positions.end(), offset);
    }

    const bool track = options.track_grad;
    Var embed = use(weights.token_embedding, track);
    Var x = ag::embedding(embed, tokens);
    for (std::size_t l = 0; l < weights.layers.size(); ++l) {
        LayerContext ctx{positions, options.segments, options.cache, l, track};
        x = decoder_layer_forward(x, weights.layers[l], config, ctx);
    }
    if (options.cache) {
        options.cache->advance(tokens.size());
    }
    x = ag::layer_norm(x, use(weights.final_gain, track), config.norm_eps);
    const Var& head = weights.output_projection ? use(*weights.output_projection, track) : embed;
    return ag::matmul_nt(x, head);
}

Tensor model_forward(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens)
{
    return forward(config, weights, tokens).value();
}

} // namespace aya::architecture

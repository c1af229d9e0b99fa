#pragma once

#include "aya/architecture/config.hpp"
#include "aya/architecture/kv_cache.hpp"
#include "aya/architecture/weights.hpp"
#include "aya/numerics/autograd.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace aya::architecture {

using numerics::TokenId;
using numerics::Var;

struct AttentionShape {
    std::size_t n_heads = 1;
    std::size_t n_kv_heads = 1;
    std::size_t d_head = 1;
};

// Query row i sits at absolute position query_offset + i and may attend key
// row j only when j <= query_offset + i. When segment ids are given, keys
// must also share the query's segment.
struct AttentionMask {
    std::size_t query_offset = 0;
    std::span<const std::int32_t> query_segments;
    std::span<const std::int32_t> key_segments;
};

// Rotates each pair (x[2i], x[2i+1]) of every d_head-sized trailing vector by
// positions[t] * base^(-2i / d_head). x is [..., T, d_head].
Tensor rope_apply(const Tensor& x, std::span<const std::size_t> positions, double base);

// RoPE over a [T, n_heads * d_head] activation, differentiable.
Var rope(const Var& x, std::span<const std::size_t> positions, std::size_t n_heads, std::size_t d_head, double base);

// Scaled dot-product attention where query head h reads KV head
// h / (n_heads / n_kv_heads). q is [Tq, n_heads*d_head]; k, v are
// [Tk, n_kv_heads*d_head]. Returns [Tq, n_heads*d_head].
Var grouped_attention(const Var& q, const Var& k, const Var& v, const AttentionShape& shape,
                      const AttentionMask& mask = {});

struct LayerContext {
    std::span<const std::size_t> positions;
    std::span<const std::int32_t> segments;
    KvCache* cache = nullptr;
    std::size_t layer = 0;
    bool track_grad = false;
};

// Wraps a parameter for the forward pass; tracked leaves receive gradients.
Var use(const Parameter& parameter, bool track_grad);

// Projects an already-normalized input through Wq/Wk/Wv, applies RoPE and
// grouped attention, then Wo. With a cache the new keys/values are appended
// and queries attend to every cached position.
Var gqa_attention(const Var& normed, const LayerWeights& weights, const ModelConfig& config, const LayerContext& ctx);

// (swish(x W_gate) * (x W_up)) W_down
Var swiglu_ffn(const Var& x, const LayerWeights& weights, bool track_grad = false);

// Parallel block: y = x + attn(norm(x)) + ffn(norm(x)) with one shared norm.
Var decoder_layer_forward(const Var& x, const LayerWeights& weights, const ModelConfig& config,
                          const LayerContext& ctx);

struct ForwardOptions {
    bool track_grad = false;
    KvCache* cache = nullptr;
    // Non-empty: one segment id per token. Attention stays inside a segment and
    // positions restart at 0 at every segment start.
    std::span<const std::int32_t> segments;
};

// Embedding -> n_layers parallel blocks -> final norm -> output projection
// (token_embedding^T when tied). Returns logits [T, vocab].
Var forward(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens,
            const ForwardOptions& options = {});

Tensor model_forward(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens);

// Positions restarting at each change of segment id.
std::vector<std::size_t> segment_positions(std::span<const std::int32_t> segments);

} // namespace aya::architecture

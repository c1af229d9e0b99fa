#pragma once

#include "aya/architecture/config.hpp"
#include "aya/numerics/autograd.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aya::architecture {

using numerics::DType;
using numerics::Parameter;
using numerics::Tensor;

struct LayerWeights {
    Parameter input_gain; // [d_model]
    Parameter wq;         // [d_model, n_heads * d_head]
    Parameter wk;         // [d_model, n_kv_heads * d_head]
    Parameter wv;         // [d_model, n_kv_heads * d_head]
    Parameter wo;         // [n_heads * d_head, d_model]
    Parameter w_gate;     // [d_model, d_ffn]
    Parameter w_up;       // [d_model, d_ffn]
    Parameter w_down;     // [d_ffn, d_model]
};

// No bias parameters exist anywhere. With tied embeddings the output
// projection is token_embedding^T and `output_projection` stays empty.
struct ModelWeights {
    Parameter token_embedding; // [vocab, d_model]
    std::vector<LayerWeights> layers;
    Parameter final_gain; // [d_model]
    std::optional<Parameter> output_projection; // [vocab, d_model], untied only

    // Stable order used by the optimizer and checkpoints.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::uint64_t element_count() const;

    void zero_grads();
};

// Gains start at 1. Matrices draw from a normal(0, 0.02) truncated at two
// standard deviations; the residual-writing projections (wo, w_down) are
// further scaled by 1/sqrt(2 * n_layers). Each parameter draws from its own
// stream of `seed`.
ModelWeights initialize_weights(const ModelConfig& config, std::uint64_t seed, DType dtype = DType::f32);
ModelWeights zero_weights(const ModelConfig& config, DType dtype = DType::f32);

// Checks every parameter shape against `config`.
void check_weights(const ModelConfig& config, const ModelWeights& weights);

} // namespace aya::architecture

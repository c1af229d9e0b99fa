#pragma once

#include "aya/architecture/kv_cache.hpp"
#include "aya/architecture/model.hpp"
#include "aya/architecture/weights.hpp"
#include "aya/numerics/rng.hpp"
#include "aya/tokenizer/chat.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aya::inference {

using architecture::KvCache;
using architecture::ModelConfig;
using architecture::ModelWeights;
using numerics::Tensor;
using numerics::TokenId;

// 2 (K and V) * n_layers * n_kv_heads * d_head * seq_len * 4 bytes.
std::uint64_t cache_memory_bytes(const ModelConfig& config, std::uint64_t seq_len);
// The same cache if every query head kept its own K/V (n_kv_heads = n_heads).
std::uint64_t mha_cache_memory_bytes(const ModelConfig& config, std::uint64_t seq_len);

struct Prefill {
    KvCache cache;
    // Logits for the position after the prompt, [vocab].
    Tensor last_logits;
};

// Runs the prompt through the model, filling a cache of `capacity` positions.
// Throws empty_prompt for an empty prompt and prompt_too_long when it does
// not fit.
Prefill prefill(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens,
                std::size_t capacity);

// Logits [vocab] for the position after `token`; extends the cache by one.
// Throws cache_overflow once the cache is full.
Tensor decode_step(const ModelConfig& config, const ModelWeights& weights, KvCache& cache, TokenId token);

struct GenerationConfig {
    std::size_t max_new_tokens = 64;
    // 0 selects greedy decoding.
    double temperature = 0.0;
    // Empty means END_OF_TURN.
    std::vector<TokenId> stop_tokens;
    std::uint64_t seed = 0;
    // Upper bound on prompt + generated tokens.
    std::size_t context_len = 8192;

    void validate() const;
};

// Greedy: the highest logit, lowest id on ties. Otherwise a draw from
// softmax(logits / temperature).
TokenId select_token(const Tensor& logits, double temperature, numerics::Rng& rng);

enum class FinishReason { stop_token, max_new_tokens, context_full };
const char* to_string(FinishReason reason);

struct GenerationResult {
    // Generated ids, without the stop token.
    std::vector<TokenId> tokens;
    FinishReason finish_reason = FinishReason::max_new_tokens;
    std::size_t prompt_tokens = 0;
    std::uint64_t cache_bytes = 0;
};

GenerationResult generate_ids(const ModelConfig& config, const ModelWeights& weights,
                              std::span<const TokenId> prompt, const GenerationConfig& gen);

struct ChatGeneration {
    std::string completion;
    GenerationResult result;
    // Set when the prompt had more than one user turn; only single-turn use
    // is a supported contract.
    bool multi_turn = false;
};

// Renders `turns` with the generation header and decodes the completion.
ChatGeneration generate(const ModelConfig& config, const ModelWeights& weights,
                        std::span<const tokenizer::ChatTurn> turns, const GenerationConfig& gen,
                        const tokenizer::TokenizerModel& tokenizer);

} // namespace aya::inference

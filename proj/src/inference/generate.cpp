#include "aya/inference/generate.hpp"

#include "aya/common/error.hpp"
#include "aya/numerics/ops.hpp"
#include "aya/tokenizer/unicode.hpp"

#include <algorithm>
#include <cmath>

namespace aya::inference {

namespace {

Tensor last_row(const Tensor& logits)
{
    const std::size_t v = logits.cols();
    const auto row = logits.row(logits.rows() - 1);
    return Tensor({v}, std::vector<double>(row.begin(), row.end()), logits.dtype());
}

} // namespace

std::uint64_t cache_memory_bytes(const ModelConfig& config, std::uint64_t seq_len)
{
    return 2 * config.n_layers * config.n_kv_heads * config.d_head * seq_len * 4;
}

std::uint64_t mha_cache_memory_bytes(const ModelConfig& config, std::uint64_t seq_len)
{
    ModelConfig mha = config;
    mha.n_kv_heads = config.n_heads;
    return cache_memory_bytes(mha, seq_len);
}

Prefill prefill(const ModelConfig& config, const ModelWeights& weights, std::span<const TokenId> tokens,
                std::size_t capacity)
{
    if (tokens.empty()) {
        throw InputError("empty_prompt", "prefill needs at least one token");
    }
    if (tokens.size() > capacity) {
        throw InputError("prompt_too_long", "prompt of " + std::to_string(tokens.size()) +
                                                " tokens exceeds the context of " + std::to_string(capacity));
    }
    Prefill out{KvCache(config, capacity, weights.token_embedding.value.dtype()), Tensor()};
    architecture::ForwardOptions opts;
    opts.cache = &out.cache;
    out.last_logits = last_row(architecture::forward(config, weights, tokens, opts).value());
    return out;
}

Tensor decode_step(const ModelConfig& config, const ModelWeights& weights, KvCache& cache, TokenId token)
{
    if (cache.length() >= cache.capacity()) {
        throw InputError("cache_overflow", "KV cache is full at " + std::to_string(cache.capacity()) + " positions");
    }
    architecture::ForwardOptions opts;
    opts.cache = &cache;
    const TokenId one[1] = {token};
    return last_row(architecture::forward(config, weights, one, opts).value());
}

void GenerationConfig::validate() const
{
    if (max_new_tokens < 1) {
        throw InputError("invalid_config", "max_new_tokens must be at least 1");
    }
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw InputError("invalid_config", "temperature must be a finite non-negative number");
    }
}

TokenId select_token(const Tensor& logits, double temperature, numerics::Rng& rng)
{
    const auto v = logits.data();
    if (temperature == 0.0) {
        // max_element keeps the first maximum, i.e. the lowest id.
        return static_cast<TokenId>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    const double top = *std::max_element(v.begin(), v.end());
    std::vector<double> cumulative(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        total += std::exp((v[i] - top) / temperature);
        cumulative[i] = total;
    }
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<TokenId>(std::min<std::size_t>(it - cumulative.begin(), v.size() - 1));
}

const char* to_string(FinishReason reason)
{
    switch (reason) {
    case FinishReason::stop_token: return "stop_token";
    case FinishReason::max_new_tokens: return "max_new_tokens";
    case FinishReason::context_full: return "context_full";
    }
    return "?";
}

GenerationResult generate_ids(const ModelConfig& config, const ModelWeights& weights,
                              std::span<const TokenId> prompt, const GenerationConfig& gen)
{
    gen.validate();
    std::vector<TokenId> stops = gen.stop_tokens;
    if (stops.empty()) {
        stops.push_back(tokenizer::id_of(tokenizer::Special::end_of_turn));
    }
    const std::size_t capacity = std::min(gen.context_len, prompt.size() + gen.max_new_tokens);
    Prefill state = prefill(config, weights, prompt, capacity);
    numerics::Rng rng(gen.seed, 0x67656e);

    GenerationResult result;
    result.prompt_tokens = prompt.size();
    Tensor logits = std::move(state.last_logits);
    for (;;) {
        const TokenId next = select_token(logits, gen.temperature, rng);
        if (std::find(stops.begin(), stops.end(), next) != stops.end()) {
            result.finish_reason = FinishReason::stop_token;
            break;
        }
        result.tokens.push_back(next);
        if (result.tokens.size() >= gen.max_new_tokens) {
            result.finish_reason = FinishReason::max_new_tokens;
            break;
        }
        if (state.cache.length() >= state.cache.capacity()) {
            result.finish_reason = FinishReason::context_full;
            break;
        }
        logits = decode_step(config, weights, state.cache, next);
    }
    result.cache_bytes = state.cache.bytes_in_use();
    return result;
}

ChatGeneration generate(const ModelConfig& config, const ModelWeights& weights,
                        std::span<const tokenizer::ChatTurn> turns, const GenerationConfig& gen,
                        const tokenizer::TokenizerModel& tokenizer)
{
    const auto rendered = tokenizer::render_chat(turns, std::nullopt, tokenizer);
    ChatGeneration out;
    out.result = generate_ids(config, weights, rendered.ids, gen);
    // Drop any special ids the model emitted so the text re-renders cleanly.
    std::vector<TokenId> body;
    for (TokenId id : out.result.tokens) {
        if (!tokenizer.is_special(id)) {
            body.push_back(id);
        }
    }
    out.completion = tokenizer::sanitize_utf8(tokenizer.decode(body));
    out.multi_turn = std::count_if(turns.begin(), turns.end(),
                                   [](const tokenizer::ChatTurn& t) { return t.role == tokenizer::Role::user; }) > 1;
    return out;
}

} // namespace aya::inference

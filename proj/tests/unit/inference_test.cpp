#include "aya/architecture/config.hpp"
#include "aya/common/error.hpp"
#include "aya/inference/generate.hpp"
#include "aya/tokenizer/bpe.hpp"
#include "aya/tokenizer/chat.hpp"
#include "aya/tokenizer/unicode.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace aya::inference;
using aya::architecture::preset;
using aya::numerics::DType;

namespace {

ModelConfig small_config(std::size_t vocab = 300)
{
    ModelConfig c = preset("toy-small");
    c.vocab_size = vocab;
    return c;
}

// Larger init so logits are far from uniform and greedy decoding is not trivial.
ModelWeights spiky_weights(const ModelConfig& c, std::uint64_t seed, DType dtype = DType::f32)
{
    ModelWeights w = aya::architecture::initialize_weights(c, seed, dtype);
    for (auto* p : w.parameters()) {
        if (p->value.rank() == 2) {
            for (double& v : p->value.data()) {
                v *= 25.0;
            }
            p->value.settle("test");
        }
    }
    return w;
}

} // namespace

TEST(CacheMemory, FormulaAndGqaRatios)
{
    const ModelConfig b8 = preset("aya-23-8b-shape");
    const ModelConfig b35 = preset("aya-23-35b-shape");
    EXPECT_EQ(cache_memory_bytes(b8, 8192), 2ull * 32 * 8 * 128 * 8192 * 4);
    EXPECT_EQ(cache_memory_bytes(b8, 8192) * 4, mha_cache_memory_bytes(b8, 8192));
    EXPECT_EQ(static_cast<double>(cache_memory_bytes(b8, 100)) / static_cast<double>(mha_cache_memory_bytes(b8, 100)),
              0.25);
    EXPECT_EQ(cache_memory_bytes(b35, 8192), mha_cache_memory_bytes(b35, 8192));
}

TEST(CacheMemory, CacheHoldsOnlyKvHeads)
{
    const ModelConfig c = small_config();
    const ModelWeights w = aya::architecture::initialize_weights(c, 1);
    const std::vector<TokenId> prompt{1, 2, 3, 4, 5};
    const Prefill p = prefill(c, w, prompt, 16);
    EXPECT_EQ(p.cache.length(), 5u);
    EXPECT_EQ(p.cache.key_store(0).shape(), (aya::numerics::Shape{c.n_kv_heads, 16, c.d_head}));
    EXPECT_EQ(p.cache.bytes_in_use(), cache_memory_bytes(c, 5));
}

TEST(Prefill, EmptyPromptRejected)
{
    const ModelConfig c = small_config();
    const ModelWeights w = aya::architecture::initialize_weights(c, 1);
    EXPECT_THROW(prefill(c, w, std::vector<TokenId>{}, 4), aya::InputError);
    EXPECT_THROW(prefill(c, w, std::vector<TokenId>{1, 2, 3}, 2), aya::InputError);
}

TEST(DecodeStep, IncrementalLogitsMatchFullRecompute)
{
    for (DType dtype : {DType::f32, DType::f64}) {
        const ModelConfig c = small_config();
        const ModelWeights w = spiky_weights(c, 2, dtype);
        const std::vector<TokenId> prompt{1, 40, 41, 42};
        GenerationConfig gen;
        gen.max_new_tokens = 64;
        gen.stop_tokens = {static_cast<TokenId>(c.vocab_size + 1)};
        const auto result = generate_ids(c, w, prompt, gen);
        ASSERT_EQ(result.tokens.size(), 64u);

        std::vector<TokenId> all = prompt;
        all.insert(all.end(), result.tokens.begin(), result.tokens.end());
        const Tensor full = aya::architecture::model_forward(c, w, all);

        Prefill p = prefill(c, w, prompt, all.size());
        double worst = 0.0;
        for (std::size_t v = 0; v < c.vocab_size; ++v) {
            worst = std::max(worst, std::abs(p.last_logits[v] - full.at(prompt.size() - 1, v)));
        }
        for (std::size_t i = prompt.size(); i < all.size(); ++i) {
            const Tensor step = decode_step(c, w, p.cache, all[i]);
            for (std::size_t v = 0; v < c.vocab_size; ++v) {
                worst = std::max(worst, std::abs(step[v] - full.at(i, v)));
            }
        }
        EXPECT_LT(worst, dtype == DType::f32 ? 1e-5 : 1e-12) << aya::numerics::to_string(dtype);
        EXPECT_EQ(p.cache.length(), all.size());
    }
}

TEST(DecodeStep, OverflowRejected)
{
    const ModelConfig c = small_config();
    const ModelWeights w = aya::architecture::initialize_weights(c, 3);
    Prefill p = prefill(c, w, std::vector<TokenId>{1, 2}, 3);
    decode_step(c, w, p.cache, 5);
    try {
        decode_step(c, w, p.cache, 6);
        FAIL();
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "cache_overflow");
    }
}

TEST(SelectToken, GreedyTiesPickLowestId)
{
    aya::numerics::Rng rng(1);
    const Tensor logits({5}, {0.5, 2.0, -1.0, 2.0, 1.0}, DType::f64);
    EXPECT_EQ(select_token(logits, 0.0, rng), 1u);
    const Tensor flat({3}, {0.0, 0.0, 0.0}, DType::f64);
    EXPECT_EQ(select_token(flat, 0.0, rng), 0u);
}

TEST(SelectToken, TemperatureFollowsSoftmax)
{
    aya::numerics::Rng rng(2);
    const Tensor logits({2}, {0.0, std::log(3.0)}, DType::f64);
    int ones = 0;
    for (int i = 0; i < 20000; ++i) {
        ones += select_token(logits, 1.0, rng) == 1 ? 1 : 0;
    }
    EXPECT_NEAR(ones / 20000.0, 0.75, 0.015);
}

TEST(Generate, StopTokenHaltsAndIsExcluded)
{
    const ModelConfig c = small_config();
    const ModelWeights w = spiky_weights(c, 4);
    const std::vector<TokenId> prompt{1, 2, 3};
    GenerationConfig gen;
    gen.max_new_tokens = 10;
    gen.stop_tokens = {static_cast<TokenId>(c.vocab_size + 1)};
    const auto free_run = generate_ids(c, w, prompt, gen);
    ASSERT_GE(free_run.tokens.size(), 3u);
    gen.stop_tokens = {free_run.tokens[2]};
    const auto stopped = generate_ids(c, w, prompt, gen);
    EXPECT_EQ(stopped.finish_reason, FinishReason::stop_token);
    const auto first = std::find(free_run.tokens.begin(), free_run.tokens.end(), free_run.tokens[2]);
    EXPECT_EQ(stopped.tokens, std::vector<TokenId>(free_run.tokens.begin(), first));
}

TEST(Generate, RespectsMaxNewTokensAndContext)
{
    const ModelConfig c = small_config();
    const ModelWeights w = spiky_weights(c, 5);
    GenerationConfig gen;
    gen.max_new_tokens = 7;
    gen.stop_tokens = {static_cast<TokenId>(c.vocab_size + 1)};
    const auto r = generate_ids(c, w, std::vector<TokenId>{1, 2}, gen);
    EXPECT_EQ(r.tokens.size(), 7u);
    EXPECT_EQ(r.finish_reason, FinishReason::max_new_tokens);
    gen.context_len = 5;
    const auto capped = generate_ids(c, w, std::vector<TokenId>{1, 2}, gen);
    EXPECT_EQ(capped.tokens.size(), 4u);
    EXPECT_EQ(capped.finish_reason, FinishReason::context_full);
}

TEST(Generate, GreedyIgnoresSeedAndSamplingIsSeeded)
{
    const ModelConfig c = small_config();
    const ModelWeights w = spiky_weights(c, 6);
    const std::vector<TokenId> prompt{3, 4};
    GenerationConfig gen;
    gen.max_new_tokens = 12;
    gen.stop_tokens = {static_cast<TokenId>(c.vocab_size + 1)};
    gen.seed = 1;
    const auto a = generate_ids(c, w, prompt, gen);
    gen.seed = 2;
    EXPECT_EQ(generate_ids(c, w, prompt, gen).tokens, a.tokens);

    gen.temperature = 2.0;
    gen.seed = 9;
    const auto s1 = generate_ids(c, w, prompt, gen);
    const auto s2 = generate_ids(c, w, prompt, gen);
    EXPECT_EQ(s1.tokens, s2.tokens);
    gen.seed = 10;
    EXPECT_NE(generate_ids(c, w, prompt, gen).tokens, s1.tokens);
}

TEST(Generate, ChatCompletionReRendersAndParses)
{
    const std::vector<std::string> corpus{"hello there how are you today my friend"};
    const auto tok = aya::tokenizer::bpe_train(corpus, 300);
    const ModelConfig c = small_config(tok.vocab_size());
    const ModelWeights w = spiky_weights(c, 7);
    const std::vector<aya::tokenizer::ChatTurn> turns{{aya::tokenizer::Role::user, "hello there"}};
    GenerationConfig gen;
    gen.max_new_tokens = 20;
    const ChatGeneration g = generate(c, w, turns, gen, tok);
    EXPECT_FALSE(g.multi_turn);
    EXPECT_TRUE(aya::tokenizer::is_valid_utf8(g.completion));
    EXPECT_EQ(generate(c, w, turns, gen, tok).completion, g.completion);
    const auto rendered = aya::tokenizer::render_chat(turns, g.completion, tok);
    const auto parsed = aya::tokenizer::parse_chat(rendered.ids, tok);
    ASSERT_EQ(parsed.turns.size(), 2u);
    EXPECT_EQ(parsed.turns[1].content, aya::tokenizer::normalize(g.completion));
}

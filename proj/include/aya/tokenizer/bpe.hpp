#pragma once

#include "aya/numerics/ops.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aya::tokenizer {

using numerics::TokenId;

// Reserved ids. Byte tokens follow at byte_offset, learned merges after those.
enum class Special : TokenId { pad = 0, bos, start_of_turn, end_of_turn, user, chatbot };

inline constexpr std::size_t special_count = 6;
inline constexpr TokenId byte_offset = special_count;
inline constexpr std::size_t base_vocab_size = special_count + 256;

constexpr TokenId id_of(Special s) { return static_cast<TokenId>(s); }
constexpr TokenId byte_token(std::uint8_t b) { return byte_offset + b; }

// Literal text of each special token, as used in the rendered chat format.
const std::array<std::string_view, special_count>& special_literals();

struct Merge {
    TokenId left;
    TokenId right;
    TokenId result;

    friend bool operator==(const Merge&, const Merge&) = default;
};

struct CorpusDoc {
    std::string language;
    std::string text;
};

struct TrainOptions {
    std::size_t vocab_size = 4096;
    std::uint64_t seed = 0;
    // Per-language byte budget for balancing; unset means the smallest
    // language's total.
    std::optional<std::size_t> byte_budget;
};

class TokenizerModel {
public:
    // Base model: specials and the 256 byte tokens, no merges.
    TokenizerModel();

    std::size_t vocab_size() const noexcept { return tokens_.size(); }
    const std::vector<Merge>& merges() const noexcept { return merges_; }
    // Raw bytes of a token (the literal for specials).
    const std::string& token_bytes(TokenId id) const;
    bool is_special(TokenId id) const noexcept { return id < special_count; }
    std::optional<TokenId> find(std::string_view token) const;

    // NFC-normalizes, pretokenizes, and applies merges by rank. Special-token
    // literals in `text` are encoded as ordinary bytes.
    std::vector<TokenId> encode(std::string_view text) const;
    // Concatenated token bytes; specials decode to their literals.
    std::string decode(std::span<const TokenId> ids) const;

    // Appends a merge; returns the resulting id (an existing one when the
    // concatenation is already in the vocabulary).
    TokenId add_merge(TokenId left, TokenId right);

    void save(const std::filesystem::path& dir) const;
    static TokenizerModel load(const std::filesystem::path& dir);

    friend bool operator==(const TokenizerModel& a, const TokenizerModel& b)
    {
        return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
    }

private:
    std::vector<TokenId> encode_piece(std::string_view piece) const;

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::vector<Merge> merges_;
    // (left << 32 | right) -> merge rank
    std::unordered_map<std::uint64_t, std::uint32_t> ranks_;
};

// Uniform per-language byte budget: documents of each language are visited in a
// seeded order and kept while the language stays within budget (at least one
// document per language is always kept). Output order is by language, then
// visit order.
std::vector<CorpusDoc> balance_corpus(std::span<const CorpusDoc> corpus, std::uint64_t seed,
                                      std::optional<std::size_t> byte_budget = std::nullopt);

// Greedy BPE: repeatedly merges the most frequent adjacent pair (ties by
// lexicographic byte order of left then right) until the vocabulary reaches
// `vocab_size` or no pair remains.
TokenizerModel bpe_train(std::span<const CorpusDoc> corpus, const TrainOptions& options);
TokenizerModel bpe_train(std::span<const std::string> texts, std::size_t vocab_size, std::uint64_t seed = 0);

// Word frequency table the trainer consumes, exposed for oracle tests.
std::vector<std::pair<std::string, std::uint64_t>> word_counts(std::span<const CorpusDoc> corpus);

} // namespace aya::tokenizer

#include "aya/tokenizer/bpe.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/numerics/rng.hpp"
#include "aya/tokenizer/unicode.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace aya::tokenizer {

namespace {

std::uint64_t pair_key(TokenId a, TokenId b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

InputError format_error(const std::filesystem::path& file, std::size_t line, const std::string& what)
{
    return InputError("invalid_tokenizer", file.string() + ":" + std::to_string(line) + ": " + what);
}

// Line-format escaping: backslash, space, tab, CR, LF and anything that is not
// printable ASCII or part of a well-formed UTF-8 sequence are escaped.
std::string escape(std::string_view bytes)
{
    static const char* hex = "0123456789abcdef";
    std::string out;
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        if (c >= 0x80) {
            std::size_t len = c >= 0xf0 ? 4 : c >= 0xe0 ? 3 : c >= 0xc0 ? 2 : 1;
            if (len > 1 && i + len <= bytes.size() && is_valid_utf8(bytes.substr(i, len))) {
                out.append(bytes.substr(i, len));
                i += len;
                continue;
            }
        }
        switch (c) {
        case '\\': out += "\\\\"; break;
        case ' ': out += "\\s"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default:
            if (c < 0x20 || c >= 0x7f) {
                out += "\\x";
                out += hex[c >> 4];
                out += hex[c & 0xf];
            } else {
                out += static_cast<char>(c);
            }
        }
        ++i;
    }
    return out;
}

std::optional<std::string> unescape(std::string_view text)
{
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '\\') {
            out += text[i];
            continue;
        }
        if (++i >= text.size()) {
            return std::nullopt;
        }
        switch (text[i]) {
        case '\\': out += '\\'; break;
        case 's': out += ' '; break;
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case 'x': {
            if (i + 2 >= text.size()) {
                return std::nullopt;
            }
            unsigned value = 0;
            for (int k = 1; k <= 2; ++k) {
                const char h = text[i + k];
                value <<= 4;
                if (h >= '0' && h <= '9') {
                    value |= static_cast<unsigned>(h - '0');
                } else if (h >= 'a' && h <= 'f') {
                    value |= static_cast<unsigned>(h - 'a' + 10);
                } else {
                    return std::nullopt;
                }
            }
            out += static_cast<char>(value);
            i += 2;
            break;
        }
        default: return std::nullopt;
        }
    }
    return out;
}

std::vector<std::string_view> split_tabs(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) {
            return fields;
        }
        start = tab + 1;
    }
}

std::vector<std::string_view> lines_of(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

constexpr std::string_view vocab_header = "#aya-bpe-vocab v1";
constexpr std::string_view merges_header = "#aya-bpe-merges v1";

} // namespace

const std::array<std::string_view, special_count>& special_literals()
{
    static const std::array<std::string_view, special_count> literals{
        "<PAD>",
        "<BOS_TOKEN>",
        "<|START_OF_TURN_TOKEN|>",
        "<|END_OF_TURN_TOKEN|>",
        "<|USER_TOKEN|>",
        "<|CHATBOT_TOKEN|>",
    };
    return literals;
}

TokenizerModel::TokenizerModel()
{
    tokens_.reserve(base_vocab_size);
    for (std::string_view lit : special_literals()) {
        tokens_.emplace_back(lit);
    }
    for (int b = 0; b < 256; ++b) {
        tokens_.emplace_back(1, static_cast<char>(b));
        index_.emplace(tokens_.back(), static_cast<TokenId>(tokens_.size() - 1));
    }
}

const std::string& TokenizerModel::token_bytes(TokenId id) const
{
    if (id >= tokens_.size()) {
        throw InputError("token_out_of_range",
                         "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
    }
    return tokens_[id];
}

std::optional<TokenId> TokenizerModel::find(std::string_view token) const
{
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId TokenizerModel::add_merge(TokenId left, TokenId right)
{
    if (left < byte_offset || right < byte_offset || left >= tokens_.size() || right >= tokens_.size()) {
        throw InputError("invalid_merge", "merge operands must be non-special vocabulary tokens");
    }
    if (ranks_.contains(pair_key(left, right))) {
        throw InputError("invalid_merge", "duplicate merge");
    }
    std::string joined = tokens_[left] + tokens_[right];
    TokenId result;
    if (const auto it = index_.find(joined); it != index_.end()) {
        result = it->second;
    } else {
        result = static_cast<TokenId>(tokens_.size());
        tokens_.push_back(joined);
        index_.emplace(std::move(joined), result);
    }
    ranks_.emplace(pair_key(left, right), static_cast<std::uint32_t>(merges_.size()));
    merges_.push_back({left, right, result});
    return result;
}

std::vector<TokenId> TokenizerModel::encode_piece(std::string_view piece) const
{
    std::vector<TokenId> ids;
    ids.reserve(piece.size());
    for (char c : piece) {
        ids.push_back(byte_token(static_cast<std::uint8_t>(c)));
    }
    while (ids.size() > 1) {
        std::uint32_t best = UINT32_MAX;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            const auto it = ranks_.find(pair_key(ids[i], ids[i + 1]));
            if (it != ranks_.end()) {
                best = std::min(best, it->second);
            }
        }
        if (best == UINT32_MAX) {
            break;
        }
        const Merge& m = merges_[best];
        std::size_t out = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i + 1 < ids.size() && ids[i] == m.left && ids[i + 1] == m.right) {
                ids[out++] = m.result;
                ++i;
            } else {
                ids[out++] = ids[i];
            }
        }
        ids.resize(out);
    }
    return ids;
}

std::vector<TokenId> TokenizerModel::encode(std::string_view text) const
{
    std::vector<TokenId> ids;
    for (const std::string& piece : pretokenize(normalize(text))) {
        const auto part = encode_piece(piece);
        ids.insert(ids.end(), part.begin(), part.end());
    }
    return ids;
}

std::string TokenizerModel::decode(std::span<const TokenId> ids) const
{
    std::string out;
    for (TokenId id : ids) {
        out += token_bytes(id);
    }
    return out;
}

void TokenizerModel::save(const std::filesystem::path& dir) const
{
    std::ostringstream vocab;
    vocab << vocab_header << '\n';
    for (std::size_t id = 0; id < tokens_.size(); ++id) {
        vocab << id << '\t' << escape(tokens_[id]) << '\t' << (id < special_count ? 1 : 0) << '\n';
    }
    std::ostringstream merges;
    merges << merges_header << '\n';
    for (const Merge& m : merges_) {
        merges << escape(tokens_[m.left]) << '\t' << escape(tokens_[m.right]) << '\n';
    }
    write_file(dir / "vocab.txt", vocab.str());
    write_file(dir / "merges.txt", merges.str());
}

TokenizerModel TokenizerModel::load(const std::filesystem::path& dir)
{
    const auto vocab_path = dir / "vocab.txt";
    const auto merges_path = dir / "merges.txt";
    const std::string vocab_text = read_file(vocab_path);
    const std::string merges_text = read_file(merges_path);

    const auto vocab_lines = lines_of(vocab_text);
    if (vocab_lines.empty() || vocab_lines[0] != vocab_header) {
        throw format_error(vocab_path, 1, "missing header");
    }
    std::vector<std::string> tokens;
    for (std::size_t n = 1; n < vocab_lines.size(); ++n) {
        const auto fields = split_tabs(vocab_lines[n]);
        if (fields.size() != 3) {
            throw format_error(vocab_path, n + 1, "expected id, token, is_special");
        }
        if (fields[0] != std::to_string(tokens.size())) {
            throw format_error(vocab_path, n + 1, "ids must be dense and ascending");
        }
        const auto token = unescape(fields[1]);
        if (!token) {
            throw format_error(vocab_path, n + 1, "bad escape");
        }
        const bool special = tokens.size() < special_count;
        if (fields[2] != (special ? "1" : "0")) {
            throw format_error(vocab_path, n + 1, "special flag mismatch");
        }
        tokens.push_back(*token);
    }

    TokenizerModel model;
    if (tokens.size() < base_vocab_size ||
        !std::equal(model.tokens_.begin(), model.tokens_.end(), tokens.begin())) {
        throw format_error(vocab_path, 2, "specials and byte tokens must occupy the first 262 ids");
    }

    const auto merge_lines = lines_of(merges_text);
    if (merge_lines.empty() || merge_lines[0] != merges_header) {
        throw format_error(merges_path, 1, "missing header");
    }
    for (std::size_t n = 1; n < merge_lines.size(); ++n) {
        const auto fields = split_tabs(merge_lines[n]);
        if (fields.size() != 2) {
            throw format_error(merges_path, n + 1, "expected left, right");
        }
        const auto left = unescape(fields[0]);
        const auto right = unescape(fields[1]);
        if (!left || !right) {
            throw format_error(merges_path, n + 1, "bad escape");
        }
        const auto l = model.find(*left);
        const auto r = model.find(*right);
        if (!l || !r) {
            throw format_error(merges_path, n + 1, "merge references unknown token");
        }
        const TokenId result = model.add_merge(*l, *r);
        if (result >= tokens.size() || tokens[result] != model.tokens_[result]) {
            throw format_error(merges_path, n + 1, "merge result disagrees with vocabulary");
        }
    }
    if (model.tokens_.size() != tokens.size()) {
        throw format_error(vocab_path, model.tokens_.size() + 2, "vocabulary has tokens no merge produces");
    }
    return model;
}

std::vector<CorpusDoc> balance_corpus(std::span<const CorpusDoc> corpus, std::uint64_t seed,
                                      std::optional<std::size_t> byte_budget)
{
    std::map<std::string, std::vector<std::size_t>> by_language;
    std::map<std::string, std::size_t> totals;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        by_language[corpus[i].language].push_back(i);
        totals[corpus[i].language] += corpus[i].text.size();
    }
    std::size_t budget = byte_budget.value_or(0);
    if (!byte_budget) {
        budget = SIZE_MAX;
        for (const auto& [lang, total] : totals) {
            budget = std::min(budget, total);
        }
    }
    std::vector<CorpusDoc> out;
    for (auto& [lang, docs] : by_language) {
        // Seeded Fisher-Yates over the documents of this language, keyed on
        // the language so adding a language does not reshuffle the others.
        numerics::Rng rng(seed, fnv1a64(lang));
        for (std::size_t i = docs.size(); i > 1; --i) {
            std::swap(docs[i - 1], docs[rng.below(i)]);
        }
        std::size_t used = 0;
        for (std::size_t idx : docs) {
            const std::size_t size = corpus[idx].text.size();
            if (used > 0 && used + size > budget) {
                continue;
            }
            used += size;
            out.push_back(corpus[idx]);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::uint64_t>> word_counts(std::span<const CorpusDoc> corpus)
{
    std::map<std::string, std::uint64_t> counts;
    for (const CorpusDoc& doc : corpus) {
        for (std::string& piece : pretokenize(normalize(doc.text))) {
            ++counts[std::move(piece)];
        }
    }
    return {counts.begin(), counts.end()};
}

TokenizerModel bpe_train(std::span<const CorpusDoc> corpus, const TrainOptions& options)
{
    if (options.vocab_size <= base_vocab_size) {
        throw InputError("vocab_too_small", "vocab_size must exceed " + std::to_string(base_vocab_size) +
                                                " (specials plus byte alphabet)");
    }
    const auto balanced = balance_corpus(corpus, options.seed, options.byte_budget);
    const auto counts = word_counts(balanced);
    if (counts.empty()) {
        throw InputError("empty_corpus", "tokenizer corpus contains no text");
    }

    TokenizerModel model;
    std::vector<std::vector<TokenId>> words;
    std::vector<std::int64_t> freq;
    for (const auto& [word, n] : counts) {
        std::vector<TokenId> w;
        for (char c : word) {
            w.push_back(byte_token(static_cast<std::uint8_t>(c)));
        }
        words.push_back(std::move(w));
        freq.push_back(static_cast<std::int64_t>(n));
    }

    // Ordered by count descending, then left bytes, then right bytes.
    auto better = [&model](const std::pair<std::int64_t, std::uint64_t>& a,
                           const std::pair<std::int64_t, std::uint64_t>& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        const auto& al = model.token_bytes(static_cast<TokenId>(a.second >> 32));
        const auto& bl = model.token_bytes(static_cast<TokenId>(b.second >> 32));
        if (al != bl) {
            return al < bl;
        }
        return model.token_bytes(static_cast<TokenId>(a.second & 0xffffffffu)) <
               model.token_bytes(static_cast<TokenId>(b.second & 0xffffffffu));
    };
    std::set<std::pair<std::int64_t, std::uint64_t>, decltype(better)> queue(better);
    std::unordered_map<std::uint64_t, std::int64_t> pair_count;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;

    auto adjust = [&](std::uint64_t key, std::int64_t delta) {
        auto& count = pair_count[key];
        if (count > 0) {
            queue.erase({count, key});
        }
        count += delta;
        if (count > 0) {
            queue.insert({count, key});
        }
    };
    for (std::uint32_t w = 0; w < words.size(); ++w) {
        for (std::size_t i = 0; i + 1 < words[w].size(); ++i) {
            const auto key = pair_key(words[w][i], words[w][i + 1]);
            adjust(key, freq[w]);
            pair_words[key].push_back(w);
        }
    }

    while (model.vocab_size() < options.vocab_size && !queue.empty()) {
        const std::uint64_t best = queue.begin()->second;
        const auto left = static_cast<TokenId>(best >> 32);
        const auto right = static_cast<TokenId>(best & 0xffffffffu);
        const TokenId result = model.add_merge(left, right);

        auto affected = std::move(pair_words[best]);
        pair_words.erase(best);
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
        for (std::uint32_t w : affected) {
            auto& word = words[w];
            bool present = false;
            for (std::size_t i = 0; i + 1 < word.size(); ++i) {
                present = present || (word[i] == left && word[i + 1] == right);
            }
            if (!present) {
                continue;
            }
            for (std::size_t i = 0; i + 1 < word.size(); ++i) {
                adjust(pair_key(word[i], word[i + 1]), -freq[w]);
            }
            std::vector<TokenId> merged;
            merged.reserve(word.size());
            for (std::size_t i = 0; i < word.size(); ++i) {
                if (i + 1 < word.size() && word[i] == left && word[i + 1] == right) {
                    merged.push_back(result);
                    ++i;
                } else {
                    merged.push_back(word[i]);
                }
            }
            word = std::move(merged);
            for (std::size_t i = 0; i + 1 < word.size(); ++i) {
                const auto key = pair_key(word[i], word[i + 1]);
                adjust(key, freq[w]);
                pair_words[key].push_back(w);
            }
        }
    }
    return model;
}

TokenizerModel bpe_train(std::span<const std::string> texts, std::size_t vocab_size, std::uint64_t seed)
{
    std::vector<CorpusDoc> docs;
    for (const auto& t : texts) {
        docs.push_back({"und", t});
    }
    TrainOptions options;
    options.vocab_size = vocab_size;
    options.seed = seed;
    return bpe_train(docs, options);
}

} // namespace aya::tokenizer

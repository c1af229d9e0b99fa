#include "aya/datapipe/pack.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/tokenizer/chat.hpp"

#include <algorithm>

namespace aya::datapipe {

using nlohmann::json;

RenderedSample render_sample(const Sample& sample, const tokenizer::TokenizerModel& model)
{
    const std::vector<tokenizer::ChatTurn> turns{{tokenizer::Role::user, sample.prompt}};
    const auto chat = tokenizer::render_chat(turns, sample.completion, model);
    return {sample.id, chat.ids, tokenizer::completion_mask(chat), sample.weight};
}

std::vector<PackedSequence> pack_rendered(std::span<const RenderedSample> samples, std::size_t context_len)
{
    if (context_len < min_context_len) {
        throw InputError("context_too_small", "context_len must be at least " + std::to_string(min_context_len));
    }
    std::vector<PackedSequence> out;
    // Sum of weight * tokens per sequence, normalized at the end.
    std::vector<double> weighted;

    auto place = [&](std::size_t seq, const RenderedSample& s, std::size_t from, std::size_t to) {
        PackedSequence& p = out[seq];
        const std::size_t start = p.tokens.size();
        p.tokens.insert(p.tokens.end(), s.tokens.begin() + static_cast<std::ptrdiff_t>(from),
                        s.tokens.begin() + static_cast<std::ptrdiff_t>(to));
        p.loss_mask.insert(p.loss_mask.end(), s.loss_mask.begin() + static_cast<std::ptrdiff_t>(from),
                           s.loss_mask.begin() + static_cast<std::ptrdiff_t>(to));
        p.boundaries.push_back({s.id, start, p.tokens.size()});
        weighted[seq] += s.weight * static_cast<double>(to - from);
    };
    auto open_new = [&] {
        out.emplace_back();
        weighted.push_back(0.0);
        return out.size() - 1;
    };

    for (const RenderedSample& s : samples) {
        if (s.tokens.size() != s.loss_mask.size()) {
            throw InputError("mask_mismatch", "sample '" + s.id + "' has mismatched mask length");
        }
        std::size_t offset = 0;
        std::size_t remaining = s.tokens.size();
        while (remaining > context_len) {
            place(open_new(), s, offset, offset + context_len);
            offset += context_len;
            remaining -= context_len;
        }
        if (remaining == 0) {
            continue;
        }
        // A split sample's remainder continues in the next new sequence so its
        // chunks stay in order; whole samples go to the first that fits.
        std::size_t target = out.size();
        for (std::size_t i = 0; offset == 0 && i < out.size(); ++i) {
            if (out[i].tokens.size() + remaining <= context_len) {
                target = i;
                break;
            }
        }
        if (target == out.size()) {
            target = open_new();
        }
        place(target, s, offset, s.tokens.size());
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].weight = weighted[i] / static_cast<double>(out[i].tokens.size());
    }
    return out;
}

std::vector<PackedSequence> pack(std::span<const Sample> samples, const tokenizer::TokenizerModel& model,
                                 std::size_t context_len)
{
    std::vector<RenderedSample> rendered;
    rendered.reserve(samples.size());
    for (const Sample& s : samples) {
        rendered.push_back(render_sample(s, model));
    }
    return pack_rendered(rendered, context_len);
}

PackStats pack_stats(std::span<const PackedSequence> sequences, std::size_t context_len)
{
    PackStats stats;
    stats.sequences = sequences.size();
    std::map<std::string, std::size_t> pieces;
    for (const PackedSequence& p : sequences) {
        stats.tokens += p.tokens.size();
        stats.loss_tokens += static_cast<std::size_t>(std::count(p.loss_mask.begin(), p.loss_mask.end(), 1));
        for (const Boundary& b : p.boundaries) {
            ++pieces[b.sample_id];
        }
    }
    stats.samples = pieces.size();
    for (const auto& [id, n] : pieces) {
        stats.split_samples += n > 1 ? 1 : 0;
    }
    if (stats.sequences > 0) {
        stats.utilization =
            static_cast<double>(stats.tokens) / (static_cast<double>(stats.sequences) * static_cast<double>(context_len));
        stats.samples_per_sequence = static_cast<double>(stats.samples) / static_cast<double>(stats.sequences);
    }
    return stats;
}

void write_packed(const std::filesystem::path& dir, const PackedDataset& data)
{
    std::string tokens;
    std::string mask;
    json sequences = json::array();
    std::size_t offset = 0;
    for (const PackedSequence& p : data.sequences) {
        json bounds = json::array();
        for (const Boundary& b : p.boundaries) {
            bounds.push_back({b.sample_id, b.start, b.end});
        }
        sequences.push_back({{"offset", offset}, {"length", p.tokens.size()}, {"weight", p.weight}, {"boundaries", bounds}});
        for (TokenId id : p.tokens) {
            for (int k = 0; k < 4; ++k) {
                tokens += static_cast<char>((id >> (8 * k)) & 0xff);
            }
        }
        mask.append(p.loss_mask.begin(), p.loss_mask.end());
        offset += p.tokens.size();
    }
    json manifest = {{"format", "aya-packed"},
                     {"version", 1},
                     {"context_len", data.context_len},
                     {"token_count", offset},
                     {"tokens_sha256", sha256_hex(tokens)},
                     {"loss_mask_sha256", sha256_hex(mask)},
                     {"metadata", data.metadata},
                     {"sequences", sequences}};
    write_file(dir / "tokens.bin", tokens);
    write_file(dir / "loss_mask.bin", mask);
    write_file(dir / "packed.json", manifest.dump(1) + "\n");
}

PackedDataset read_packed(const std::filesystem::path& dir)
{
    const auto bad = [&](const std::string& what) { return InputError("invalid_packed", dir.string() + ": " + what); };
    json manifest;
    try {
        manifest = json::parse(read_file(dir / "packed.json"));
    } catch (const json::exception& e) {
        throw bad(e.what());
    }
    const std::string tokens = read_file(dir / "tokens.bin");
    const std::string mask = read_file(dir / "loss_mask.bin");
    PackedDataset data;
    try {
        if (manifest.at("format") != "aya-packed") {
            throw bad("not a packed dataset");
        }
        data.context_len = manifest.at("context_len").get<std::size_t>();
        const auto count = manifest.at("token_count").get<std::size_t>();
        if (tokens.size() != 4 * count || mask.size() != count) {
            throw bad("blob sizes disagree with token_count");
        }
        if (sha256_hex(tokens) != manifest.at("tokens_sha256") || sha256_hex(mask) != manifest.at("loss_mask_sha256")) {
            throw bad("checksum mismatch");
        }
        data.metadata = manifest.value("metadata", json::object());
        for (const json& s : manifest.at("sequences")) {
            PackedSequence p;
            const auto offset = s.at("offset").get<std::size_t>();
            const auto length = s.at("length").get<std::size_t>();
            if (offset + length > count || length > data.context_len) {
                throw bad("sequence out of bounds");
            }
            for (std::size_t i = offset; i < offset + length; ++i) {
                TokenId id = 0;
                for (int k = 0; k < 4; ++k) {
                    id |= static_cast<TokenId>(static_cast<unsigned char>(tokens[4 * i + k])) << (8 * k);
                }
                p.tokens.push_back(id);
                p.loss_mask.push_back(static_cast<std::uint8_t>(mask[i]));
            }
            p.weight = s.at("weight").get<double>();
            for (const json& b : s.at("boundaries")) {
                p.boundaries.push_back({b.at(0).get<std::string>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>()});
            }
            data.sequences.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw bad(e.what());
    }
    return data;
}

} // namespace aya::datapipe

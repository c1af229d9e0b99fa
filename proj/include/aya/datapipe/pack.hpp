#pragma once

#include "aya/datapipe/samples.hpp"
#include "aya/tokenizer/bpe.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace aya::datapipe {

using tokenizer::TokenId;

struct Boundary {
    std::string sample_id;
    // Half-open token range inside the sequence.
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const Boundary&, const Boundary&) = default;
};

struct PackedSequence {
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> loss_mask;
    std::vector<Boundary> boundaries;
    // Token-weighted mean of the member samples' weights; batch assembly draws
    // sequences proportionally to it.
    double weight = 1.0;

    friend bool operator==(const PackedSequence&, const PackedSequence&) = default;
};

// A sample after render_chat: ids plus the completion loss mask.
struct RenderedSample {
    std::string id;
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> loss_mask;
    double weight = 1.0;
};

RenderedSample render_sample(const Sample& sample, const tokenizer::TokenizerModel& model);

inline constexpr std::size_t min_context_len = 4;

// Greedy first-fit in input order: each sample goes to the first open sequence
// with room for all of it, else a new one. A sample longer than context_len
// fills fresh sequences with full chunks and its remainder starts one more
// sequence, which stays open to later samples.
std::vector<PackedSequence> pack_rendered(std::span<const RenderedSample> samples, std::size_t context_len);
std::vector<PackedSequence> pack(std::span<const Sample> samples, const tokenizer::TokenizerModel& model,
                                 std::size_t context_len);

struct PackStats {
    std::size_t sequences = 0;
    std::size_t samples = 0;
    std::size_t tokens = 0;
    std::size_t loss_tokens = 0;
    std::size_t split_samples = 0;
    // tokens / (sequences * context_len)
    double utilization = 0.0;
    double samples_per_sequence = 0.0;
};

PackStats pack_stats(std::span<const PackedSequence> sequences, std::size_t context_len);

// On-disk layout of a packed dataset directory:
//   packed.json    manifest: context_len, per-sequence offset/length/weight/boundaries
//   tokens.bin     all token ids, little-endian u32, sequences back to back
//   loss_mask.bin  one byte per token
struct PackedDataset {
    std::size_t context_len = 0;
    std::vector<PackedSequence> sequences;
    nlohmann::json metadata = nlohmann::json::object();
};

void write_packed(const std::filesystem::path& dir, const PackedDataset& data);
PackedDataset read_packed(const std::filesystem::path& dir);

} // namespace aya::datapipe

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aya::datapipe {

enum class SourceKind { templates, human, translated, synthetic };

const char* to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);

struct Sample {
    std::string id;
    std::string prompt;
    std::string completion;
    std::string language;
    std::string dataset_id;
    SourceKind source_kind = SourceKind::human;
    std::string license_tag;
    // Relative draw weight at batch assembly, set from the mixture spec.
    double weight = 1.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

nlohmann::json to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

// JSONL with one Sample object per line. Blank lines are skipped; errors name
// the file and line. Ids must be unique.
std::vector<Sample> read_samples(const std::filesystem::path& path);
std::string samples_to_jsonl(std::span<const Sample> samples);
void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);

void sort_by_id(std::vector<Sample>& samples);

struct MixtureSourceSpec {
    SourceKind source_kind = SourceKind::human;
    // Empty selects every dataset of the source kind.
    std::vector<std::string> dataset_ids;
    std::optional<std::size_t> per_language_cap;
    double weight = 1.0;

    bool selects(const Sample& s) const;
};

MixtureSourceSpec source_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MixtureSourceSpec& spec);

struct LanguageRetention {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

struct FilterResult {
    std::vector<Sample> samples;
    // Keyed by the code as it appeared in the input.
    std::map<std::string, LanguageRetention> by_language;
};

// Keeps samples whose language is in the registry, rewriting aliases to the
// canonical code.
FilterResult filter_languages(std::span<const Sample> samples);

// For every (dataset, language) group keeps min(cap, n) samples drawn
// uniformly without replacement. Independent of input order; output sorted by
// id.
std::vector<Sample> cap_samples(std::span<const Sample> samples, const MixtureSourceSpec& spec, std::uint64_t seed);

struct HoldoutSplit {
    std::vector<Sample> train;
    std::vector<Sample> heldout;
};

// Moves `n` uniformly chosen samples to the held-out set. Errors when n > size.
HoldoutSplit split_holdout(std::span<const Sample> samples, std::size_t n, std::uint64_t seed);

struct MixtureConfig {
    std::vector<MixtureSourceSpec> sources;
    // Held-out prompts are drawn from this dataset before capping.
    std::string holdout_dataset;
    std::size_t holdout_n = 0;
};

MixtureConfig mixture_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MixtureConfig& config);

struct MixtureResult {
    std::vector<Sample> train;
    std::vector<Sample> heldout;
    FilterResult filtered;
    std::size_t unselected = 0;
};

// filter_languages, then the holdout split, then per-source selection and
// capping. Samples matched by no source are dropped and counted.
MixtureResult build_mixture(std::span<const Sample> samples, const MixtureConfig& config, std::uint64_t seed);

// Counts by source kind, language and dataset, plus the full
// (source_kind, dataset, language) table. Independent of input order.
nlohmann::json mixture_report(std::span<const Sample> samples);

} // namespace aya::datapipe

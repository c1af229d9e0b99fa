#include "aya/datapipe/samples.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/datapipe/registry.hpp"
#include "aya/numerics/rng.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace aya::datapipe {

using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key)
{
    if (!j.contains(key)) {
        throw InputError("invalid_sample", std::string("missing field '") + key + "'");
    }
    const json& v = j.at(key);
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (std::string_view(key) == "id" && v.is_number_integer()) {
        return std::to_string(v.get<std::int64_t>());
    }
    throw InputError("invalid_sample", std::string("field '") + key + "' must be a string");
}

// Seeded Fisher-Yates prefix: the first k entries become a uniform sample.
template <typename T>
void shuffle_prefix(std::vector<T>& items, std::size_t k, numerics::Rng& rng)
{
    for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
        std::swap(items[i], items[i + rng.below(items.size() - i)]);
    }
}

} // namespace

const char* to_string(SourceKind kind)
{
    switch (kind) {
    case SourceKind::templates: return "templates";
    case SourceKind::human: return "human";
    case SourceKind::translated: return "translated";
    case SourceKind::synthetic: return "synthetic";
    }
    return "?";
}

SourceKind parse_source_kind(std::string_view name)
{
    for (SourceKind k : {SourceKind::templates, SourceKind::human, SourceKind::translated, SourceKind::synthetic}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw InputError("invalid_sample", "unknown source_kind '" + std::string(name) + "'");
}

json to_json(const Sample& s)
{
    json j = {{"id", s.id},
              {"prompt", s.prompt},
              {"completion", s.completion},
              {"language", s.language},
              {"dataset_id", s.dataset_id},
              {"source_kind", to_string(s.source_kind)},
              {"license_tag", s.license_tag}};
    if (s.weight != 1.0) {
        j["weight"] = s.weight;
    }
    return j;
}

Sample sample_from_json(const json& j)
{
    if (!j.is_object()) {
        throw InputError("invalid_sample", "sample must be a JSON object");
    }
    Sample s;
    s.id = required_string(j, "id");
    s.prompt = required_string(j, "prompt");
    s.completion = required_string(j, "completion");
    s.language = required_string(j, "language");
    s.dataset_id = required_string(j, "dataset_id");
    s.source_kind = parse_source_kind(required_string(j, "source_kind"));
    s.license_tag = j.contains("license_tag") ? required_string(j, "license_tag") : "";
    if (j.contains("weight")) {
        s.weight = j.at("weight").get<double>();
    }
    if (s.prompt.empty() || s.completion.empty()) {
        throw InputError("invalid_sample", "sample '" + s.id + "' has an empty prompt or completion");
    }
    if (!(s.weight >= 0.0)) {
        throw InputError("invalid_sample", "sample '" + s.id + "' has a negative weight");
    }
    return s;
}

std::vector<Sample> read_samples(const std::filesystem::path& path)
{
    const std::string text = read_file(path);
    std::vector<Sample> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(sample_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw InputError("invalid_jsonl", path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const InputError& e) {
            throw InputError(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second) {
            throw InputError("duplicate_sample_id",
                             path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + out.back().id + "'");
        }
    }
    return out;
}

std::string samples_to_jsonl(std::span<const Sample> samples)
{
    std::string out;
    for (const Sample& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples)
{
    write_file(path, samples_to_jsonl(samples));
}

void sort_by_id(std::vector<Sample>& samples)
{
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
}

bool MixtureSourceSpec::selects(const Sample& s) const
{
    if (s.source_kind != source_kind) {
        return false;
    }
    return dataset_ids.empty() || std::find(dataset_ids.begin(), dataset_ids.end(), s.dataset_id) != dataset_ids.end();
}

MixtureSourceSpec source_spec_from_json(const json& j)
{
    MixtureSourceSpec spec;
    spec.source_kind = parse_source_kind(j.at("source_kind").get<std::string>());
    if (j.contains("dataset_ids")) {
        spec.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
    }
    if (j.contains("per_language_cap") && !j.at("per_language_cap").is_null()) {
        const auto cap = j.at("per_language_cap").get<std::int64_t>();
        if (cap < 1) {
            throw InputError("invalid_mixture", "per_language_cap must be at least 1");
        }
        spec.per_language_cap = static_cast<std::size_t>(cap);
    }
    if (j.contains("weight")) {
        spec.weight = j.at("weight").get<double>();
    }
    if (!(spec.weight >= 0.0)) {
        throw InputError("invalid_mixture", "weight must be non-negative");
    }
    return spec;
}

json to_json(const MixtureSourceSpec& spec)
{
    json j = {{"source_kind", to_string(spec.source_kind)}, {"dataset_ids", spec.dataset_ids}, {"weight", spec.weight}};
    j["per_language_cap"] = spec.per_language_cap ? json(*spec.per_language_cap) : json(nullptr);
    return j;
}

FilterResult filter_languages(std::span<const Sample> samples)
{
    FilterResult result;
    for (const Sample& s : samples) {
        auto& counts = result.by_language[s.language];
        if (const auto code = canonical_language(s.language)) {
            ++counts.kept;
            result.samples.push_back(s);
            result.samples.back().language = *code;
        } else {
            ++counts.dropped;
        }
    }
    return result;
}

std::vector<Sample> cap_samples(std::span<const Sample> samples, const MixtureSourceSpec& spec, std::uint64_t seed)
{
    std::map<std::pair<std::string, std::string>, std::vector<const Sample*>> groups;
    for (const Sample& s : samples) {
        groups[{s.dataset_id, s.language}].push_back(&s);
    }
    std::vector<Sample> out;
    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
        std::size_t keep = members.size();
        if (spec.per_language_cap) {
            keep = std::min(keep, *spec.per_language_cap);
            numerics::Rng rng(seed, fnv1a64(key.first + '\0' + key.second));
            shuffle_prefix(members, keep, rng);
        }
        for (std::size_t i = 0; i < keep; ++i) {
            out.push_back(*members[i]);
        }
    }
    sort_by_id(out);
    return out;
}

HoldoutSplit split_holdout(std::span<const Sample> samples, std::size_t n, std::uint64_t seed)
{
    if (n > samples.size()) {
        throw InputError("holdout_too_large", "cannot hold out " + std::to_string(n) + " of " +
                                                  std::to_string(samples.size()) + " samples");
    }
    std::vector<Sample> sorted(samples.begin(), samples.end());
    sort_by_id(sorted);
    numerics::Rng rng(seed, fnv1a64("holdout"));
    shuffle_prefix(sorted, n, rng);
    HoldoutSplit split;
    split.heldout.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
    split.train.assign(sorted.begin() + static_cast<std::ptrdiff_t>(n), sorted.end());
    sort_by_id(split.heldout);
    sort_by_id(split.train);
    return split;
}

MixtureConfig mixture_config_from_json(const json& j)
{
    MixtureConfig config;
    try {
        for (const json& source : j.at("sources")) {
            config.sources.push_back(source_spec_from_json(source));
        }
        if (j.contains("holdout")) {
            config.holdout_dataset = j.at("holdout").at("dataset_id").get<std::string>();
            config.holdout_n = j.at("holdout").at("n").get<std::size_t>();
        }
    } catch (const json::exception& e) {
        throw InputError("invalid_mixture", e.what());
    }
    return config;
}

json to_json(const MixtureConfig& config)
{
    json sources = json::array();
    for (const auto& s : config.sources) {
        sources.push_back(to_json(s));
    }
    return {{"sources", sources}, {"holdout", {{"dataset_id", config.holdout_dataset}, {"n", config.holdout_n}}}};
}

MixtureResult build_mixture(std::span<const Sample> samples, const MixtureConfig& config, std::uint64_t seed)
{
    MixtureResult result;
    result.filtered = filter_languages(samples);
    std::vector<Sample> pool = result.filtered.samples;
    sort_by_id(pool);

    if (config.holdout_n > 0) {
        std::vector<Sample> candidates;
        std::vector<Sample> rest;
        for (Sample& s : pool) {
            (s.dataset_id == config.holdout_dataset ? candidates : rest).push_back(std::move(s));
        }
        HoldoutSplit split = split_holdout(candidates, config.holdout_n, seed);
        result.heldout = std::move(split.heldout);
        pool = std::move(rest);
        pool.insert(pool.end(), split.train.begin(), split.train.end());
        sort_by_id(pool);
    }

    std::vector<bool> claimed(pool.size(), false);
    for (std::size_t k = 0; k < config.sources.size(); ++k) {
        const MixtureSourceSpec& spec = config.sources[k];
        std::vector<Sample> selected;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!claimed[i] && spec.selects(pool[i])) {
                claimed[i] = true;
                selected.push_back(pool[i]);
            }
        }
        for (Sample& s : cap_samples(selected, spec, seed)) {
            s.weight = spec.weight;
            result.train.push_back(std::move(s));
        }
    }
    result.unselected = static_cast<std::size_t>(std::count(claimed.begin(), claimed.end(), false));
    sort_by_id(result.train);
    return result;
}

json mixture_report(std::span<const Sample> samples)
{
    std::map<std::string, std::size_t> by_kind, by_language, by_dataset;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> rows;
    for (const Sample& s : samples) {
        const std::string kind = to_string(s.source_kind);
        ++by_kind[kind];
        ++by_language[s.language];
        ++by_dataset[s.dataset_id];
        ++rows[{kind, s.dataset_id, s.language}];
    }
    json table = json::array();
    for (const auto& [key, count] : rows) {
        table.push_back({{"source_kind", std::get<0>(key)},
                         {"dataset_id", std::get<1>(key)},
                         {"language", std::get<2>(key)},
                         {"count", count}});
    }
    return {{"total", samples.size()},
            {"by_source_kind", by_kind},
            {"by_language", by_language},
            {"by_dataset", by_dataset},
            {"groups", table}};
}

} // namespace aya::datapipe

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace aya::cli {

using nlohmann::json;

// Written next to every command's output: <out>/run_manifest.json for
// directory outputs, <out>.manifest.json for file outputs. Contains no
// timestamps, so identical invocations write identical manifests.
struct RunManifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
};

// Git blob hashes of a file, or of every file under a directory (sorted,
// run_manifest.json excluded).
json content_hashes(const std::filesystem::path& path);

json to_json(const RunManifest& manifest);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
std::filesystem::path manifest_path_for(const std::filesystem::path& out);

// "key=value" pairs from --set.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets);

// Applies overrides to a JSON settings object. Dotted keys address nested
// objects; values are parsed as JSON when possible, otherwise kept as strings.
void apply_overrides(json& settings, const std::vector<std::pair<std::string, std::string>>& overrides);

json read_json_file(const std::filesystem::path& path);
void require_exists(const std::filesystem::path& path);

} // namespace aya::cli

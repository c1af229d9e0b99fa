#include "run_manifest.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"

#include <algorithm>

namespace aya::cli {

namespace fs = std::filesystem;

json content_hashes(const fs::path& path)
{
    json out = json::array();
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().filename() != "run_manifest.json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            out.push_back({{"path", f.generic_string()}, {"git_blob", git_blob_hash_file(f)}});
        }
    } else if (fs::is_regular_file(path)) {
        out.push_back({{"path", path.generic_string()}, {"git_blob", git_blob_hash_file(path)}});
    }
    return out;
}

json to_json(const RunManifest& m)
{
    json inputs = json::array();
    for (const auto& p : m.inputs) {
        for (auto& entry : content_hashes(p)) {
            inputs.push_back(std::move(entry));
        }
    }
    json outputs = json::array();
    for (const auto& p : m.outputs) {
        for (auto& entry : content_hashes(p)) {
            outputs.push_back(std::move(entry));
        }
    }
    return json{{"format", "aya-run-manifest"}, {"command", m.command}, {"config", m.config},
                {"seed", m.seed},           {"inputs", inputs},       {"outputs", outputs}};
}

void write_manifest(const fs::path& path, const RunManifest& manifest)
{
    write_file(path, to_json(manifest).dump(2) + "\n");
}

fs::path manifest_path_for(const fs::path& out)
{
    if (fs::is_directory(out)) {
        return out / "run_manifest.json";
    }
    return fs::path(out.string() + ".manifest.json");
}

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw InputError("invalid_override", "--set expects key=value, got '" + s + "'");
        }
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
}

void apply_overrides(json& settings, const std::vector<std::pair<std::string, std::string>>& overrides)
{
    for (const auto& [key, text] : overrides) {
        json value;
        try {
            value = json::parse(text);
        } catch (const json::exception&) {
            value = text;
        }
        json* node = &settings;
        std::size_t start = 0;
        for (auto dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
            node = &(*node)[key.substr(start, dot - start)];
            start = dot + 1;
        }
        (*node)[key.substr(start)] = value;
    }
}

json read_json_file(const fs::path& path)
{
    require_exists(path);
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw InputError("invalid_json", path.string() + ": " + e.what());
    }
}

void require_exists(const fs::path& path)
{
    if (!fs::exists(path)) {
        throw InputError("missing_input", "input not found: " + path.string());
    }
}

} // namespace aya::cli

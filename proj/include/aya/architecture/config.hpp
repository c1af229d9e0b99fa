#pragma once

#include "aya/common/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace aya::architecture {

class ConfigError : public InputError {
public:
    explicit ConfigError(const std::string& message) : InputError("invalid_config", message) {}
};

struct ModelConfig {
    std::string name = "custom";
    std::uint64_t vocab_size = 0;
    std::uint64_t d_model = 0;
    std::uint64_t n_layers = 0;
    // SwiGLU hidden width of each of the gate and up projections.
    std::uint64_t d_ffn = 0;
    std::uint64_t n_heads = 0;
    std::uint64_t n_kv_heads = 0;
    std::uint64_t d_head = 0;
    double rope_base = 10000.0;
    double norm_eps = 1e-5;
    bool tie_embeddings = true;

    void validate() const;
    std::uint64_t q_width() const { return n_heads * d_head; }
    std::uint64_t kv_width() const { return n_kv_heads * d_head; }
    std::uint64_t heads_per_kv() const { return n_heads / n_kv_heads; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamCount {
    std::uint64_t embedding = 0;
    std::uint64_t non_embedding = 0;

    std::uint64_t total() const { return embedding + non_embedding; }
    friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

// Closed-form count for a no-bias parallel-block decoder with 3-projection
// SwiGLU and gain-only norms (one per layer plus the final norm):
//   embedding     = vocab * d_model            (doubled when untied)
//   non_embedding = n_layers * (attn + ffn) + (n_layers + 1) * d_model
//   attn = d_model*q_width + 2*d_model*kv_width + q_width*d_model
//   ffn  = 3 * d_model * d_ffn
ParamCount count_parameters(const ModelConfig& config);

// Width of each SwiGLU projection giving roughly the parameter count of a
// 2-projection FFN of width multiplier * d_model: (2/3) * multiplier * d_model
// rounded to the nearest integer, then down to a multiple of `round_to`.
std::uint64_t scale_ffn_for_swiglu(std::uint64_t d_model, double multiplier, std::uint64_t round_to);

// Built-in presets: "aya-23-8b-shape", "aya-23-35b-shape", "toy-tiny",
// "toy-small", "toy-gradcheck".
ModelConfig preset(std::string_view name);
std::vector<std::string> preset_names();

// Key-value text format, one `key = value` per line, '#' starts a comment.
// An optional `preset = <name>` line seeds every field before the other keys
// are applied. `overrides` (same keys) win over the file.
ModelConfig parse_config_text(std::string_view text, const std::map<std::string, std::string>& overrides = {});
ModelConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides = {});
// Resolves either a preset name or a config file path.
ModelConfig resolve_config(const std::string& preset_or_path, const std::map<std::string, std::string>& overrides = {});
std::string to_config_text(const ModelConfig& config);

// Applies one key to `config`; throws ConfigError on unknown keys or bad values.
void set_config_value(ModelConfig& config, std::string_view key, std::string_view value);

} // namespace aya::architecture

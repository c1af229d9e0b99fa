#pragma once

#include <cstdint>
#include <optional>

#include <nlohmann/json.hpp>

namespace aya::training {

struct TrainConfig {
    std::uint64_t total_steps = 200;
    std::size_t batch_size = 8;
    std::size_t context_len = 256;
    double lr_peak = 6e-4;
    double lr_end = 6e-5;
    std::uint64_t warmup_steps = 0;
    std::optional<double> grad_clip;
    std::uint64_t seed = 0;
    // Loss on completion tokens only.
    bool prompt_loss_mask = true;
    // Restrict attention (and reset positions) to each packed sample.
    bool cross_document_mask = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Named presets: "aya-23" (13,200 steps, batch 64, context 8192, 6e-4 -> 6e-5)
// and "desk" (the defaults above).
TrainConfig train_preset(std::string_view name);

nlohmann::json to_json(const TrainConfig& config);
// Keys absent from `j` keep the values of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base = {});
// Applies one `key=value` override with the value parsed as JSON (bare
// strings allowed).
void set_train_value(TrainConfig& config, std::string_view key, std::string_view value);

// Linear warmup to lr_peak over warmup_steps, then
// lr_end + (lr_peak - lr_end) * (1 + cos(pi * p)) / 2 with p the fraction of
// the post-warmup steps done. Defined for 0 <= t <= total_steps.
double cosine_lr(std::uint64_t t, const TrainConfig& config);

} // namespace aya::training

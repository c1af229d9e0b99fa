#include "aya/training/schedule.hpp"

#include "aya/common/error.hpp"

#include <cmath>
#include <numbers>

namespace aya::training {

using nlohmann::json;

void TrainConfig::validate() const
{
    auto fail = [](const std::string& what) { throw InputError("invalid_config", "train config: " + what); };
    if (total_steps < 1) {
        fail("total_steps must be at least 1");
    }
    if (batch_size < 1) {
        fail("batch_size must be at least 1");
    }
    if (context_len < 2) {
        fail("context_len must be at least 2");
    }
    if (!(lr_end >= 0.0) || !(lr_end <= lr_peak)) {
        fail("need 0 <= lr_end <= lr_peak");
    }
    if (warmup_steps >= total_steps && warmup_steps > 0) {
        fail("warmup_steps must be below total_steps");
    }
    if (grad_clip && !(*grad_clip > 0.0)) {
        fail("grad_clip must be positive");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
        fail("Adam constants out of range");
    }
}

TrainConfig train_preset(std::string_view name)
{
    TrainConfig c;
    if (name == "desk") {
        return c;
    }
    if (name == "aya-23") {
        c.total_steps = 13'200;
        c.batch_size = 64;
        c.context_len = 8192;
        return c;
    }
    throw InputError("invalid_config", "unknown training preset '" + std::string(name) + "'");
}

json to_json(const TrainConfig& c)
{
    return {{"total_steps", c.total_steps},
            {"batch_size", c.batch_size},
            {"context_len", c.context_len},
            {"lr_peak", c.lr_peak},
            {"lr_end", c.lr_end},
            {"warmup_steps", c.warmup_steps},
            {"grad_clip", c.grad_clip ? json(*c.grad_clip) : json(nullptr)},
            {"seed", c.seed},
            {"prompt_loss_mask", c.prompt_loss_mask},
            {"cross_document_mask", c.cross_document_mask},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base)
{
    if (!j.is_object()) {
        throw InputError("invalid_config", "train config must be a JSON object");
    }
    TrainConfig c = base;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "preset") {
                continue;
            }
            if (key == "total_steps") {
                c.total_steps = value.get<std::uint64_t>();
            } else if (key == "batch_size") {
                c.batch_size = value.get<std::size_t>();
            } else if (key == "context_len") {
                c.context_len = value.get<std::size_t>();
            } else if (key == "lr_peak") {
                c.lr_peak = value.get<double>();
            } else if (key == "lr_end") {
                c.lr_end = value.get<double>();
            } else if (key == "warmup_steps") {
                c.warmup_steps = value.get<std::uint64_t>();
            } else if (key == "grad_clip") {
                c.grad_clip = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "prompt_loss_mask") {
                c.prompt_loss_mask = value.get<bool>();
            } else if (key == "cross_document_mask") {
                c.cross_document_mask = value.get<bool>();
            } else if (key == "adam_beta1") {
                c.adam_beta1 = value.get<double>();
            } else if (key == "adam_beta2") {
                c.adam_beta2 = value.get<double>();
            } else if (key == "adam_eps") {
                c.adam_eps = value.get<double>();
            } else {
                throw InputError("invalid_config", "unknown train config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InputError("invalid_config", std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

void set_train_value(TrainConfig& config, std::string_view key, std::string_view value)
{
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = std::string(value);
    }
    config = train_config_from_json(json{{std::string(key), parsed}}, config);
}

double cosine_lr(std::uint64_t t, const TrainConfig& c)
{
    if (t > c.total_steps) {
        throw InputError("step_out_of_range",
                         "step " + std::to_string(t) + " beyond total_steps " + std::to_string(c.total_steps));
    }
    if (t < c.warmup_steps) {
        return c.lr_peak * static_cast<double>(t + 1) / static_cast<double>(c.warmup_steps);
    }
    const double p = static_cast<double>(t - c.warmup_steps) / static_cast<double>(c.total_steps - c.warmup_steps);
    // Written as a convex combination so both endpoints are exact.
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * p));
    return c.lr_peak * w + c.lr_end * (1.0 - w);
}

} // namespace aya::training

#pragma once

#include "aya/architecture/model.hpp"
#include "aya/architecture/weights.hpp"
#include "aya/datapipe/pack.hpp"
#include "aya/numerics/rng.hpp"
#include "aya/training/optimizer.hpp"
#include "aya/training/schedule.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace aya::training {

using architecture::ModelConfig;
using architecture::ModelWeights;
using datapipe::PackedSequence;

struct TrainState {
    OptimizerState optimizer;
    // Batch-assembly generator; advanced by every draw.
    numerics::RngState data_rng;

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

TrainState make_train_state(ModelWeights& weights, const TrainConfig& config);

// Draws batch_size sequence indices with replacement, each with probability
// proportional to its weight.
std::vector<std::size_t> assemble_batch(std::span<const PackedSequence> data, std::size_t batch_size,
                                        numerics::RngState& rng);

struct StepResult {
    std::uint64_t step = 0; // the optimizer step just taken (1-based)
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::size_t loss_tokens = 0;
};

// Mean next-token negative log-likelihood over every loss position of the
// batch, accumulating gradients into `weights` when `backward_pass` is set.
// Returns (loss, loss_tokens).
std::pair<double, std::size_t> batch_loss(const ModelConfig& model_config, ModelWeights& weights,
                                          std::span<const PackedSequence* const> batch, const TrainConfig& config,
                                          bool backward_pass);

// Forward, masked cross-entropy, backward, optional clipping, then Adam at
// cosine_lr(state.step). Throws all_zero_mask for batches with no loss
// positions and non_finite_loss (internal) on NaN/Inf.
StepResult train_step(const ModelConfig& model_config, ModelWeights& weights,
                      std::span<const PackedSequence* const> batch, const TrainConfig& config, TrainState& state);

// Runs until state.optimizer.step == config.total_steps or `max_steps` more
// steps were taken, assembling batches from `data`.
std::vector<StepResult> train(const ModelConfig& model_config, ModelWeights& weights,
                              std::span<const PackedSequence> data, const TrainConfig& config, TrainState& state,
                              std::uint64_t max_steps = UINT64_MAX,
                              const std::function<void(const StepResult&)>& on_step = {});

nlohmann::json to_json(const StepResult& r);

struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    ModelWeights weights;
    TrainState state;
};

// Directory with manifest.json (configs, step, RNG state, tensor table with
// shape, dtype, byte range and SHA-256) and tensors.bin (raw little-endian
// floats of each tensor's dtype).
void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& model_config,
                     const TrainConfig& train_config, const ModelWeights& weights, const TrainState& state);
// Verifies checksums and shapes. With `expected` set, a checkpoint for any
// other model config is rejected with checkpoint_mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelConfig* expected = nullptr);

} // namespace aya::training

#include "aya/training/trainer.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace aya::training {

using nlohmann::json;
using numerics::DType;
using numerics::Rng;

namespace {

void append_le(std::string& out, std::uint64_t bits, int bytes)
{
    for (int k = 0; k < bytes; ++k) {
        out += static_cast<char>((bits >> (8 * k)) & 0xff);
    }
}

std::uint64_t read_le(std::string_view in, std::size_t at, int bytes)
{
    std::uint64_t bits = 0;
    for (int k = 0; k < bytes; ++k) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
    }
    return bits;
}

std::string encode_tensor(const Tensor& t)
{
    std::string out;
    if (t.dtype() == DType::f32) {
        out.reserve(4 * t.size());
        for (double v : t.data()) {
            append_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
        }
    } else {
        out.reserve(8 * t.size());
        for (double v : t.data()) {
            append_le(out, std::bit_cast<std::uint64_t>(v), 8);
        }
    }
    return out;
}

void decode_tensor(std::string_view bytes, Tensor& t)
{
    auto data = t.data();
    if (t.dtype() == DType::f32) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(read_le(bytes, 4 * i, 4)));
        }
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = std::bit_cast<double>(read_le(bytes, 8 * i, 8));
        }
    }
}

std::size_t element_bytes(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

} // namespace

TrainState make_train_state(ModelWeights& weights, const TrainConfig& config)
{
    TrainState state;
    const auto params = weights.parameters();
    state.optimizer = make_optimizer_state(params, config.adam_beta1, config.adam_beta2, config.adam_eps);
    state.data_rng = Rng(config.seed, fnv1a64("batches")).state();
    return state;
}

std::vector<std::size_t> assemble_batch(std::span<const PackedSequence> data, std::size_t batch_size,
                                        numerics::RngState& rng_state)
{
    std::vector<double> cumulative;
    double total = 0.0;
    for (const PackedSequence& p : data) {
        total += p.weight;
        cumulative.push_back(total);
    }
    if (data.empty() || !(total > 0.0)) {
        throw InputError("no_training_data", "no packed sequences with positive weight");
    }
    Rng rng(rng_state);
    std::vector<std::size_t> picks;
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        picks.push_back(std::min(static_cast<std::size_t>(it - cumulative.begin()), data.size() - 1));
    }
    rng_state = rng.state();
    return picks;
}

std::pair<double, std::size_t> batch_loss(const ModelConfig& model_config, ModelWeights& weights,
                                          std::span<const PackedSequence* const> batch, const TrainConfig& config,
                                          bool backward_pass)
{
    struct Prepared {
        const PackedSequence* seq;
        std::vector<double> mask;
        std::vector<std::int32_t> segments;
        std::size_t count = 0;
    };
    std::vector<Prepared> items;
    std::size_t total_count = 0;
    for (const PackedSequence* seq : batch) {
        const std::size_t T = seq->tokens.size();
        if (T < 2) {
            continue;
        }
        Prepared item{seq, std::vector<double>(T - 1), {}, 0};
        std::vector<std::int32_t> seg(T, 0);
        if (config.cross_document_mask) {
            for (std::size_t b = 0; b < seq->boundaries.size(); ++b) {
                for (std::size_t i = seq->boundaries[b].start; i < seq->boundaries[b].end; ++i) {
                    seg[i] = static_cast<std::int32_t>(b);
                }
            }
            item.segments.assign(seg.begin(), seg.end() - 1);
        }
        for (std::size_t i = 0; i + 1 < T; ++i) {
            bool on = config.prompt_loss_mask ? seq->loss_mask[i + 1] != 0 : true;
            on = on && seg[i] == seg[i + 1];
            item.mask[i] = on ? 1.0 : 0.0;
            item.count += on ? 1 : 0;
        }
        total_count += item.count;
        if (item.count > 0) {
            items.push_back(std::move(item));
        }
    }
    if (total_count == 0) {
        throw InputError("all_zero_mask", "batch has no loss positions (every target is prompt side)");
    }

    const double inv = 1.0 / static_cast<double>(total_count);
    double total = 0.0;
    for (const Prepared& item : items) {
        const auto& tokens = item.seq->tokens;
        const std::span<const numerics::TokenId> inputs(tokens.data(), tokens.size() - 1);
        const std::span<const numerics::TokenId> targets(tokens.data() + 1, tokens.size() - 1);
        architecture::ForwardOptions opts;
        opts.track_grad = backward_pass;
        opts.segments = item.segments;
        const numerics::Var logits = architecture::forward(model_config, weights, inputs, opts);
        const numerics::Var nll = numerics::ag::nll_sum(logits, targets, item.mask);
        total += nll.value().item();
        if (backward_pass) {
            numerics::backward(numerics::ag::scale(nll, inv));
        }
    }
    return {total * inv, total_count};
}

StepResult train_step(const ModelConfig& model_config, ModelWeights& weights,
                      std::span<const PackedSequence* const> batch, const TrainConfig& config, TrainState& state)
{
    StepResult r;
    r.lr = cosine_lr(state.optimizer.step, config);
    weights.zero_grads();
    const auto [loss, count] = batch_loss(model_config, weights, batch, config, true);
    if (!std::isfinite(loss)) {
        throw InternalError("non_finite_loss", "loss is " + std::to_string(loss) + " at step " +
                                                   std::to_string(state.optimizer.step) + " (lr " +
                                                   std::to_string(r.lr) + ", " + std::to_string(count) + " tokens)");
    }
    r.loss = loss;
    r.loss_tokens = count;
    const auto params = weights.parameters();
    r.grad_norm = config.grad_clip ? clip_grad_norm(params, *config.grad_clip) : global_grad_norm(params);
    adam_step(params, state.optimizer, r.lr);
    r.step = state.optimizer.step;
    return r;
}

std::vector<StepResult> train(const ModelConfig& model_config, ModelWeights& weights,
                              std::span<const PackedSequence> data, const TrainConfig& config, TrainState& state,
                              std::uint64_t max_steps, const std::function<void(const StepResult&)>& on_step)
{
    std::vector<StepResult> results;
    for (std::uint64_t taken = 0; taken < max_steps && state.optimizer.step < config.total_steps; ++taken) {
        const auto picks = assemble_batch(data, config.batch_size, state.data_rng);
        std::vector<const PackedSequence*> batch;
        for (std::size_t i : picks) {
            batch.push_back(&data[i]);
        }
        results.push_back(train_step(model_config, weights, batch, config, state));
        if (on_step) {
            on_step(results.back());
        }
    }
    return results;
}

json to_json(const StepResult& r)
{
    return {{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}, {"grad_norm", r.grad_norm}, {"loss_tokens", r.loss_tokens}};
}

void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& model_config,
                     const TrainConfig& train_config, const ModelWeights& weights, const TrainState& state)
{
    const auto params = weights.parameters();
    if (state.optimizer.m.size() != params.size() || state.optimizer.v.size() != params.size()) {
        throw InternalError("checkpoint_state", "optimizer moments do not match the parameter list");
    }
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto* p : params) {
        tensors.emplace_back(p->name, &p->value);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensors.emplace_back("adam.m." + params[i]->name, &state.optimizer.m[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensors.emplace_back("adam.v." + params[i]->name, &state.optimizer.v[i]);
    }

    std::string blob;
    json table = json::array();
    for (const auto& [name, t] : tensors) {
        const std::string bytes = encode_tensor(*t);
        table.push_back({{"name", name},
                         {"shape", t->shape()},
                         {"dtype", numerics::to_string(t->dtype())},
                         {"offset", blob.size()},
                         {"bytes", bytes.size()},
                         {"sha256", sha256_hex(bytes)}});
        blob += bytes;
    }
    const json manifest = {
        {"format", "aya-checkpoint"},
        {"version", 1},
        {"model_config", architecture::to_config_text(model_config)},
        {"train_config", to_json(train_config)},
        {"step", state.optimizer.step},
        {"rng", {{"seed", state.data_rng.seed}, {"stream", state.data_rng.stream}, {"counter", state.data_rng.counter}}},
        {"adam", {{"beta1", state.optimizer.beta1}, {"beta2", state.optimizer.beta2}, {"eps", state.optimizer.eps}}},
        {"tensors", table},
    };
    write_file(dir / "tensors.bin", blob);
    write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelConfig* expected)
{
    const auto corrupt = [&](const std::string& what) {
        return InputError("checkpoint_corrupt", dir.string() + ": " + what);
    };
    json manifest;
    try {
        manifest = json::parse(read_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw corrupt(e.what());
    }
    const std::string blob = read_file(dir / "tensors.bin");

    Checkpoint ck;
    try {
        if (manifest.at("format") != "aya-checkpoint") {
            throw corrupt("not a checkpoint manifest");
        }
        ck.model_config = architecture::parse_config_text(manifest.at("model_config").get<std::string>());
        if (expected && *expected != ck.model_config) {
            throw InputError("checkpoint_mismatch", dir.string() + ": checkpoint was written for model '" +
                                                        ck.model_config.name + "' with a different shape than '" +
                                                        expected->name + "'");
        }
        ck.train_config = train_config_from_json(manifest.at("train_config"));

        const json& table = manifest.at("tensors");
        std::map<std::string, const json*> by_name;
        for (const json& entry : table) {
            by_name[entry.at("name").get<std::string>()] = &entry;
        }
        const auto find = [&](const std::string& name) -> const json& {
            const auto it = by_name.find(name);
            if (it == by_name.end()) {
                throw corrupt("missing tensor " + name);
            }
            return *it->second;
        };
        const DType dtype = numerics::parse_dtype(find("embed.weight").at("dtype").get<std::string>());
        ck.weights = architecture::zero_weights(ck.model_config, dtype);
        const auto load_into = [&](const std::string& name, Tensor& t) {
            const json& e = find(name);
            if (e.at("shape").get<numerics::Shape>() != t.shape()) {
                throw InputError("checkpoint_mismatch", dir.string() + ": tensor " + name + " has shape " +
                                                            e.at("shape").dump() + ", expected " +
                                                            numerics::shape_string(t.shape()));
            }
            t = Tensor(t.shape(), numerics::parse_dtype(e.at("dtype").get<std::string>()));
            const auto offset = e.at("offset").get<std::size_t>();
            const auto bytes = e.at("bytes").get<std::size_t>();
            if (bytes != t.size() * element_bytes(t.dtype()) || offset + bytes > blob.size()) {
                throw corrupt("tensor " + name + " has a bad byte range");
            }
            const std::string_view view(blob.data() + offset, bytes);
            if (sha256_hex(view) != e.at("sha256").get<std::string>()) {
                throw corrupt("checksum mismatch for tensor " + name);
            }
            decode_tensor(view, t);
        };
        auto params = ck.weights.parameters();
        for (auto* p : params) {
            load_into(p->name, p->value);
            p->zero_grad();
        }
        ck.state.optimizer = make_optimizer_state(params, manifest.at("adam").at("beta1").get<double>(),
                                                  manifest.at("adam").at("beta2").get<double>(),
                                                  manifest.at("adam").at("eps").get<double>());
        ck.state.optimizer.step = manifest.at("step").get<std::uint64_t>();
        for (std::size_t i = 0; i < params.size(); ++i) {
            load_into("adam.m." + params[i]->name, ck.state.optimizer.m[i]);
            load_into("adam.v." + params[i]->name, ck.state.optimizer.v[i]);
        }
        const json& rng = manifest.at("rng");
        ck.state.data_rng = {rng.at("seed").get<std::uint64_t>(), rng.at("stream").get<std::uint64_t>(),
                             rng.at("counter").get<std::uint64_t>()};
    } catch (const json::exception& e) {
        throw corrupt(e.what());
    }
    return ck;
}

} // namespace aya::training

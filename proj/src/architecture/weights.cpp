#include "aya/architecture/weights.hpp"

#include "aya/numerics/rng.hpp"

#include <cmath>

namespace aya::architecture {

std::vector<Parameter*> ModelWeights::parameters()
{
    std::vector<Parameter*> out{&token_embedding};
    for (auto& l : layers) {
        for (Parameter* p : {&l.input_gain, &l.wq, &l.wk, &l.wv, &l.wo, &l.w_gate, &l.w_up, &l.w_down}) {
            out.push_back(p);
        }
    }
    out.push_back(&final_gain);
    if (output_projection) {
        out.push_back(&*output_projection);
    }
    return out;
}

std::vector<const Parameter*> ModelWeights::parameters() const
{
    std::vector<const Parameter*> out;
    for (Parameter* p : const_cast<ModelWeights*>(this)->parameters()) {
        out.push_back(p);
    }
    return out;
}

std::uint64_t ModelWeights::element_count() const
{
    std::uint64_t n = 0;
    for (const Parameter* p : parameters()) {
        n += p->value.size();
    }
    return n;
}

void ModelWeights::zero_grads()
{
    for (Parameter* p : parameters()) {
        p->zero_grad();
    }
}

namespace {

struct Slot {
    std::string name;
    numerics::Shape shape;
};

// Parameter names and shapes in ModelWeights::parameters() order.
std::vector<Slot> layout(const ModelConfig& c)
{
    c.validate();
    std::vector<Slot> slots{{"embed.weight", {c.vocab_size, c.d_model}}};
    for (std::uint64_t i = 0; i < c.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        slots.push_back({p + "input_norm.gain", {c.d_model}});
        slots.push_back({p + "attn.wq", {c.d_model, c.q_width()}});
        slots.push_back({p + "attn.wk", {c.d_model, c.kv_width()}});
        slots.push_back({p + "attn.wv", {c.d_model, c.kv_width()}});
        slots.push_back({p + "attn.wo", {c.q_width(), c.d_model}});
        slots.push_back({p + "ffn.w_gate", {c.d_model, c.d_ffn}});
        slots.push_back({p + "ffn.w_up", {c.d_model, c.d_ffn}});
        slots.push_back({p + "ffn.w_down", {c.d_ffn, c.d_model}});
    }
    slots.push_back({"final_norm.gain", {c.d_model}});
    if (!c.tie_embeddings) {
        slots.push_back({"lm_head.weight", {c.vocab_size, c.d_model}});
    }
    return slots;
}

ModelWeights allocate(const ModelConfig& c, DType dtype)
{
    ModelWeights w;
    w.layers.resize(c.n_layers);
    if (!c.tie_embeddings) {
        w.output_projection.emplace();
    }
    const auto slots = layout(c);
    auto params = w.parameters();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        Tensor t(slots[i].shape, dtype);
        if (t.rank() == 1) {
            t.fill(1.0);
        }
        *params[i] = Parameter(slots[i].name, std::move(t));
    }
    return w;
}

bool is_residual_output(const std::string& name)
{
    return name.ends_with("attn.wo") || name.ends_with("ffn.w_down");
}

} // namespace

ModelWeights initialize_weights(const ModelConfig& config, std::uint64_t seed, DType dtype)
{
    ModelWeights w = allocate(config, dtype);
    const numerics::Rng root(seed);
    const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(config.n_layers));
    auto params = w.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (p.value.rank() != 2) {
            continue;
        }
        numerics::Rng rng = root.split(i);
        const double stddev = 0.02 * (is_residual_output(p.name) ? residual_scale : 1.0);
        for (double& x : p.value.data()) {
            x = rng.truncated_normal(stddev);
        }
        p.value.settle("initialize_weights");
    }
    return w;
}

ModelWeights zero_weights(const ModelConfig& config, DType dtype)
{
    return allocate(config, dtype);
}

void check_weights(const ModelConfig& config, const ModelWeights& weights)
{
    const auto want = layout(config);
    const auto have = weights.parameters();
    if (want.size() != have.size()) {
        throw ConfigError("weights hold " + std::to_string(have.size()) + " parameters, config '" + config.name
                          + "' expects " + std::to_string(want.size()));
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (want[i].name != have[i]->name || want[i].shape != have[i]->value.shape()) {
            throw ConfigError("parameter '" + have[i]->name + "' " + numerics::shape_string(have[i]->value.shape())
                              + " does not match config (expected '" + want[i].name + "' "
                              + numerics::shape_string(want[i].shape) + ")");
        }
    }
}

} // namespace aya::architecture

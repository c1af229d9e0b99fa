#include "aya/architecture/config.hpp"
#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/datapipe/pack.hpp"
#include "aya/datapipe/samples.hpp"
#include "aya/numerics/rng.hpp"
#include "aya/tokenizer/bpe.hpp"
#include "aya/training/optimizer.hpp"
#include "aya/training/schedule.hpp"
#include "aya/training/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace aya::training;
using aya::architecture::ModelConfig;
using aya::architecture::ModelWeights;
using aya::datapipe::PackedSequence;
using aya::numerics::DType;
using aya::numerics::Rng;

namespace {

std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("aya_train_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

struct Fixture {
    aya::tokenizer::TokenizerModel tokenizer;
    ModelConfig config;
    std::vector<PackedSequence> data;
};

Fixture overfit_fixture(std::size_t context_len = 64)
{
    const auto samples = aya::datapipe::read_samples(std::string(AYA_SOURCE_DIR) + "/tests/fixtures/overfit.jsonl");
    std::vector<std::string> texts;
    for (const auto& s : samples) {
        texts.push_back(s.prompt + " " + s.completion);
    }
    Fixture f;
    f.tokenizer = aya::tokenizer::bpe_train(texts, 320, 0);
    f.config = aya::architecture::preset("toy-small");
    f.config.vocab_size = f.tokenizer.vocab_size();
    f.data = aya::datapipe::pack(samples, f.tokenizer, context_len);
    return f;
}

std::vector<const PackedSequence*> all_of(const std::vector<PackedSequence>& data)
{
    std::vector<const PackedSequence*> out;
    for (const auto& p : data) {
        out.push_back(&p);
    }
    return out;
}

TrainConfig small_run()
{
    TrainConfig c;
    c.total_steps = 10;
    c.batch_size = 3;
    c.lr_peak = 5e-3;
    c.lr_end = 5e-4;
    c.seed = 17;
    return c;
}

} // namespace

TEST(CosineLr, PublishedEndpointsAndMidpoint)
{
    const TrainConfig c = train_preset("aya-23");
    EXPECT_EQ(c.total_steps, 13'200u);
    EXPECT_EQ(cosine_lr(0, c), 6e-4);
    EXPECT_EQ(cosine_lr(c.total_steps, c), 6e-5);
    EXPECT_NEAR(cosine_lr(c.total_steps / 2, c), 3.3e-4, 1e-12);
}

TEST(CosineLr, MonotoneAfterWarmupAndRangeChecked)
{
    TrainConfig c = train_preset("aya-23");
    c.warmup_steps = 100;
    double prev = cosine_lr(0, c);
    for (std::uint64_t t = 1; t < c.warmup_steps; ++t) {
        EXPECT_GT(cosine_lr(t, c), prev);
        prev = cosine_lr(t, c);
    }
    EXPECT_EQ(cosine_lr(c.warmup_steps, c), 6e-4);
    for (std::uint64_t t = c.warmup_steps + 1; t <= c.total_steps; ++t) {
        EXPECT_LE(cosine_lr(t, c), cosine_lr(t - 1, c));
    }
    EXPECT_EQ(cosine_lr(c.total_steps, c), 6e-5);
    EXPECT_THROW(cosine_lr(c.total_steps + 1, c), aya::InputError);
}

TEST(TrainConfigIo, JsonRoundTripAndValidation)
{
    TrainConfig c = train_preset("aya-23");
    c.grad_clip = 1.0;
    EXPECT_EQ(train_config_from_json(to_json(c)), c);
    set_train_value(c, "lr_peak", "1e-3");
    EXPECT_EQ(c.lr_peak, 1e-3);
    EXPECT_THROW(set_train_value(c, "lr_end", "0.5"), aya::InputError);
    EXPECT_THROW(set_train_value(c, "steps", "3"), aya::InputError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged)
{
    aya::numerics::Parameter p("w", aya::numerics::Tensor({3}, {1.0, -2.0, 0.5}, DType::f64));
    std::vector<aya::numerics::Parameter*> params{&p};
    OptimizerState s = make_optimizer_state(params);
    const auto before = p.value;
    for (int i = 0; i < 50; ++i) {
        adam_step(params, s, 1e-2);
    }
    EXPECT_EQ(p.value, before);
    EXPECT_EQ(s.step, 50u);
}

TEST(Adam, FirstStepMatchesClosedForm)
{
    aya::numerics::Parameter p("w", aya::numerics::Tensor({3}, {1.0, -2.0, 0.5}, DType::f64));
    p.grad = aya::numerics::Tensor({3}, {0.3, -4.0, 1e-3}, DType::f64);
    std::vector<aya::numerics::Parameter*> params{&p};
    OptimizerState s = make_optimizer_state(params);
    const double lr = 1e-3;
    adam_step(params, s, lr);
    // m_hat = g and v_hat = g^2 after one step, so the update is lr * g / (|g| + eps).
    const double g[3] = {0.3, -4.0, 1e-3};
    const double p0[3] = {1.0, -2.0, 0.5};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(p.value[i], p0[i] - lr * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
        EXPECT_NEAR(std::abs(p.value[i] - p0[i]), lr, 1e-7);
    }
}

TEST(Adam, SecondStepMatchesHandRecurrence)
{
    aya::numerics::Parameter p("w", aya::numerics::Tensor({1}, {0.0}, DType::f64));
    std::vector<aya::numerics::Parameter*> params{&p};
    OptimizerState s = make_optimizer_state(params);
    p.grad = aya::numerics::Tensor({1}, {1.0}, DType::f64);
    adam_step(params, s, 0.1);
    p.grad = aya::numerics::Tensor({1}, {-2.0}, DType::f64);
    adam_step(params, s, 0.1);
    const double m1 = 0.1, v1 = 0.001;
    const double m2 = 0.9 * m1 + 0.1 * -2.0, v2 = 0.999 * v1 + 0.001 * 4.0;
    const double u1 = 0.1 * 1.0 / (1.0 + 1e-8);
    const double u2 = 0.1 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
    EXPECT_NEAR(p.value[0], -u1 - u2, 1e-14);
}

TEST(Adam, ShapeMismatchRejected)
{
    aya::numerics::Parameter p("w", aya::numerics::Tensor({3}, DType::f64));
    std::vector<aya::numerics::Parameter*> params{&p};
    OptimizerState s = make_optimizer_state(params);
    p.grad = aya::numerics::Tensor({4}, DType::f64);
    EXPECT_THROW(adam_step(params, s, 1e-3), aya::numerics::ShapeError);
}

TEST(ClipGradNorm, ScalesToBound)
{
    aya::numerics::Parameter a("a", aya::numerics::Tensor({2}, DType::f64));
    aya::numerics::Parameter b("b", aya::numerics::Tensor({1}, DType::f64));
    a.grad = aya::numerics::Tensor({2}, {3.0, 0.0}, DType::f64);
    b.grad = aya::numerics::Tensor({1}, {4.0}, DType::f64);
    std::vector<aya::numerics::Parameter*> params{&a, &b};
    EXPECT_DOUBLE_EQ(clip_grad_norm(params, 1.0), 5.0);
    EXPECT_NEAR(global_grad_norm(params), 1.0, 1e-15);
}

TEST(TrainStep, AllPromptMaskRejected)
{
    Fixture f = overfit_fixture();
    for (auto& p : f.data) {
        std::fill(p.loss_mask.begin(), p.loss_mask.end(), 0);
    }
    ModelWeights w = aya::architecture::initialize_weights(f.config, 1);
    TrainConfig c = small_run();
    TrainState s = make_train_state(w, c);
    const auto batch = all_of(f.data);
    try {
        train_step(f.config, w, batch, c, s);
        FAIL();
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "all_zero_mask");
    }
}

TEST(TrainStep, InitialLossNearLogVocab)
{
    Fixture f = overfit_fixture();
    ModelWeights w = aya::architecture::initialize_weights(f.config, 2);
    const auto [loss, count] = batch_loss(f.config, w, all_of(f.data), small_run(), false);
    EXPECT_GT(count, 0u);
    const double expected = std::log(static_cast<double>(f.config.vocab_size));
    EXPECT_LT(std::abs(loss - expected) / expected, 0.02) << loss << " vs " << expected;
}

TEST(TrainStep, LossInvariantToPackingOrderWithDocumentMasking)
{
    const auto samples = aya::datapipe::read_samples(std::string(AYA_SOURCE_DIR) + "/tests/fixtures/overfit.jsonl");
    Fixture f = overfit_fixture();
    auto reversed = samples;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = aya::datapipe::pack(samples, f.tokenizer, 64);
    const auto b = aya::datapipe::pack(reversed, f.tokenizer, 64);
    TrainConfig c = small_run();
    c.cross_document_mask = true;
    ModelWeights w = aya::architecture::initialize_weights(f.config, 3, DType::f64);
    const double la = batch_loss(f.config, w, all_of(a), c, false).first;
    const double lb = batch_loss(f.config, w, all_of(b), c, false).first;
    EXPECT_NEAR(la, lb, 1e-12);
    c.cross_document_mask = false;
    EXPECT_NE(batch_loss(f.config, w, all_of(a), c, false).first, la);
}

TEST(Training, DeterministicRuns)
{
    Fixture f = overfit_fixture();
    const TrainConfig c = small_run();
    ModelWeights w1 = aya::architecture::initialize_weights(f.config, 4);
    ModelWeights w2 = aya::architecture::initialize_weights(f.config, 4);
    TrainState s1 = make_train_state(w1, c);
    TrainState s2 = make_train_state(w2, c);
    const auto r1 = train(f.config, w1, f.data, c, s1, 5);
    const auto r2 = train(f.config, w2, f.data, c, s2, 5);
    ASSERT_EQ(r1.size(), 5u);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        EXPECT_EQ(r1[i].loss, r2[i].loss);
    }
    EXPECT_EQ(s1, s2);
    EXPECT_EQ(w1.token_embedding.value, w2.token_embedding.value);
}

TEST(Training, AssembleBatchFollowsWeights)
{
    std::vector<PackedSequence> data(3);
    data[0].weight = 0.0;
    data[1].weight = 1.0;
    data[2].weight = 3.0;
    aya::numerics::RngState rng{5, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    for (int i = 0; i < 100; ++i) {
        for (std::size_t k : assemble_batch(data, 40, rng)) {
            ++counts[k];
        }
    }
    EXPECT_EQ(counts[0], 0u);
    EXPECT_NEAR(static_cast<double>(counts[2]) / 4000.0, 0.75, 0.03);
    EXPECT_EQ(rng.counter > 0, true);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical)
{
    Fixture f = overfit_fixture();
    const TrainConfig c = small_run();
    ModelWeights w = aya::architecture::initialize_weights(f.config, 5);
    TrainState s = make_train_state(w, c);
    train(f.config, w, f.data, c, s, 3);
    const auto a = temp_dir("a");
    const auto b = temp_dir("b");
    save_checkpoint(a, f.config, c, w, s);
    const Checkpoint ck = load_checkpoint(a, &f.config);
    EXPECT_EQ(ck.state, s);
    EXPECT_EQ(ck.train_config, c);
    EXPECT_EQ(ck.weights.layers[1].w_down.value, w.layers[1].w_down.value);
    save_checkpoint(b, ck.model_config, ck.train_config, ck.weights, ck.state);
    EXPECT_EQ(aya::read_file(a / "manifest.json"), aya::read_file(b / "manifest.json"));
    EXPECT_EQ(aya::read_file(a / "tensors.bin"), aya::read_file(b / "tensors.bin"));
}

TEST(Checkpoint, ResumeMatchesUnbrokenRun)
{
    Fixture f = overfit_fixture();
    const TrainConfig c = small_run();
    ModelWeights unbroken = aya::architecture::initialize_weights(f.config, 6);
    TrainState su = make_train_state(unbroken, c);
    const auto full = train(f.config, unbroken, f.data, c, su);
    ASSERT_EQ(full.size(), 10u);

    ModelWeights first = aya::architecture::initialize_weights(f.config, 6);
    TrainState sf = make_train_state(first, c);
    train(f.config, first, f.data, c, sf, 5);
    const auto dir = temp_dir("resume");
    save_checkpoint(dir, f.config, c, first, sf);
    Checkpoint ck = load_checkpoint(dir);
    const auto rest = train(ck.model_config, ck.weights, f.data, ck.train_config, ck.state);
    ASSERT_EQ(rest.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(rest[i].step, full[5 + i].step);
        EXPECT_EQ(rest[i].loss, full[5 + i].loss) << "step " << rest[i].step;
        EXPECT_EQ(rest[i].lr, full[5 + i].lr);
    }
    EXPECT_EQ(ck.state, su);
    auto pa = ck.weights.parameters();
    auto pb = unbroken.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
    }
}

TEST(Checkpoint, WrongConfigAndCorruptionRejected)
{
    Fixture f = overfit_fixture();
    const TrainConfig c = small_run();
    ModelWeights w = aya::architecture::initialize_weights(f.config, 7);
    TrainState s = make_train_state(w, c);
    const auto dir = temp_dir("bad");
    save_checkpoint(dir, f.config, c, w, s);
    ModelConfig other = f.config;
    other.d_ffn = 96;
    try {
        load_checkpoint(dir, &other);
        FAIL();
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "checkpoint_mismatch");
    }
    std::string blob = aya::read_file(dir / "tensors.bin");
    blob[100] = static_cast<char>(blob[100] ^ 0x40);
    aya::write_file(dir / "tensors.bin", blob);
    try {
        load_checkpoint(dir);
        FAIL();
    } catch (const aya::InputError& e) {
        EXPECT_EQ(e.code(), "checkpoint_corrupt");
    }
}

TEST(Training, OverfitsThirtyTwoSamples)
{
    Fixture f = overfit_fixture();
    TrainConfig c;
    c.total_steps = 500;
    c.lr_peak = 1e-2;
    c.lr_end = 1e-3;
    ModelWeights w = aya::architecture::initialize_weights(f.config, 8);
    TrainState s = make_train_state(w, c);
    const auto batch = all_of(f.data);
    double loss = 0.0;
    std::uint64_t steps = 0;
    while (steps < c.total_steps) {
        loss = train_step(f.config, w, batch, c, s).loss;
        ++steps;
        if (loss < 0.05) {
            break;
        }
    }
    RecordProperty("steps", std::to_string(steps));
    EXPECT_LT(loss, 0.05) << "after " << steps << " steps";
}

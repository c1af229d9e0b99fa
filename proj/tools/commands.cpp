#include "commands.hpp"

#include "run_manifest.hpp"

#include "aya/architecture/config.hpp"
#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/datapipe/pack.hpp"
#include "aya/datapipe/samples.hpp"
#include "aya/evaluation/runner.hpp"
#include "aya/inference/generate.hpp"
#include "aya/tokenizer/bpe.hpp"
#include "aya/training/trainer.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>

namespace aya::cli {

namespace fs = std::filesystem;
using architecture::ModelConfig;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

std::string with_commas(std::uint64_t v)
{
    std::string digits = std::to_string(v);
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) {
        digits.insert(static_cast<std::size_t>(i), ",");
    }
    return digits;
}

// defaults <- --config file <- --set, restricted to the keys of `defaults`.
json resolve_settings(json defaults, const Common& common)
{
    json settings = defaults;
    if (!common.config.empty()) {
        const json file = read_json_file(common.config);
        if (!file.is_object()) {
            throw InputError("invalid_config", common.config + " must hold a JSON object");
        }
        settings.update(file);
    }
    apply_overrides(settings, parse_overrides(common.sets));
    for (const auto& [key, value] : settings.items()) {
        if (!defaults.contains(key)) {
            throw InputError("invalid_config", "unknown setting '" + key + "'");
        }
    }
    return settings;
}

template <class T>
T setting(const json& settings, const char* key)
{
    try {
        return settings.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError("invalid_config", std::string("bad value for '") + key + "': " + e.what());
    }
}

std::uint64_t seed_of(const Common& common, const json& settings)
{
    if (common.seed) {
        return *common.seed;
    }
    return settings.contains("seed") && !settings["seed"].is_null() ? setting<std::uint64_t>(settings, "seed") : 0;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

fs::path prepare_dir(const std::string& out)
{
    if (out.empty()) {
        throw InputError("missing_output", "--out is required");
    }
    fs::create_directories(out);
    return out;
}

void finish(const std::string& command, const json& config, std::uint64_t seed, std::vector<fs::path> inputs,
            const fs::path& out)
{
    RunManifest m{command, config, seed, std::move(inputs), {out}};
    write_manifest(manifest_path_for(out), m);
}

struct LoadedModel {
    training::Checkpoint checkpoint;
    tokenizer::TokenizerModel tokenizer;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& tokenizer_dir)
{
    require_exists(checkpoint);
    require_exists(tokenizer_dir);
    LoadedModel m{training::load_checkpoint(checkpoint), tokenizer::TokenizerModel::load(tokenizer_dir)};
    if (m.tokenizer.vocab_size() > m.checkpoint.model_config.vocab_size) {
        throw InputError("tokenizer_mismatch", "tokenizer has " + std::to_string(m.tokenizer.vocab_size()) +
                                                   " tokens but the model only " +
                                                   std::to_string(m.checkpoint.model_config.vocab_size));
    }
    return m;
}

} // namespace

int count_params(const CountParamsArgs& args)
{
    std::map<std::string, std::string> overrides;
    for (const auto& [k, v] : parse_overrides(args.common.sets)) {
        overrides[k] = v;
    }
    std::vector<ModelConfig> configs;
    std::vector<fs::path> inputs;
    if (args.common.config.empty()) {
        for (const char* name : {"aya-23-8b-shape", "aya-23-35b-shape"}) {
            configs.push_back(architecture::resolve_config(name, overrides));
        }
    } else {
        configs.push_back(architecture::resolve_config(args.common.config, overrides));
        if (fs::exists(args.common.config)) {
            inputs.emplace_back(args.common.config);
        }
    }
    json rows = json::array();
    for (const auto& c : configs) {
        const auto count = architecture::count_parameters(c);
        rows.push_back({{"name", c.name},
                        {"embedding", count.embedding},
                        {"non_embedding", count.non_embedding},
                        {"total", count.total()}});
        if (!args.json) {
            std::cout << c.name << "  embedding=" << with_commas(count.embedding)
                      << "  non_embedding=" << with_commas(count.non_embedding)
                      << "  total=" << with_commas(count.total()) << "\n";
        }
    }
    if (args.json) {
        print_json(rows);
    }
    if (!args.common.out.empty()) {
        write_file(args.common.out, rows.dump(2) + "\n");
        json config = json::array();
        for (const auto& c : configs) {
            config.push_back(architecture::to_config_text(c));
        }
        finish("count-params", config, 0, inputs, args.common.out);
    }
    return 0;
}

int train_tokenizer(const TrainTokenizerArgs& args)
{
    const json settings =
        resolve_settings({{"vocab_size", 4096}, {"byte_budget", nullptr}, {"seed", nullptr}}, args.common);
    tokenizer::TrainOptions options;
    options.vocab_size = setting<std::size_t>(settings, "vocab_size");
    options.seed = seed_of(args.common, settings);
    if (!settings["byte_budget"].is_null()) {
        options.byte_budget = setting<std::size_t>(settings, "byte_budget");
    }
    if (args.inputs.empty()) {
        throw InputError("missing_input", "train-tokenizer needs at least one --input");
    }
    std::vector<tokenizer::CorpusDoc> corpus;
    std::vector<fs::path> inputs;
    for (const auto& path : args.inputs) {
        require_exists(path);
        inputs.emplace_back(path);
        for (const auto& s : datapipe::read_samples(path)) {
            corpus.push_back({s.language, s.prompt + "\n" + s.completion});
        }
    }
    const auto model = tokenizer::bpe_train(corpus, options);
    const fs::path out = prepare_dir(args.common.out);
    model.save(out);
    json resolved = settings;
    resolved["seed"] = options.seed;
    finish("train-tokenizer", resolved, options.seed, inputs, out);
    print_json({{"vocab_size", model.vocab_size()}, {"merges", model.merges().size()}, {"documents", corpus.size()}});
    return 0;
}

int build_mixture(const BuildMixtureArgs& args)
{
    if (args.common.config.empty()) {
        throw InputError("missing_input", "build-mixture needs --config <mixture.json>");
    }
    json config = read_json_file(args.common.config);
    apply_overrides(config, parse_overrides(args.common.sets));
    const auto mixture = datapipe::mixture_config_from_json(config);
    const std::uint64_t seed = args.common.seed.value_or(0);

    std::vector<datapipe::Sample> samples;
    std::vector<fs::path> inputs{args.common.config};
    std::set<std::string> ids;
    for (const auto& path : args.inputs) {
        require_exists(path);
        inputs.emplace_back(path);
        for (auto& s : datapipe::read_samples(path)) {
            if (!ids.insert(s.id).second) {
                throw InputError("duplicate_sample_id", "sample id '" + s.id + "' appears in several inputs");
            }
            samples.push_back(std::move(s));
        }
    }
    if (samples.empty()) {
        throw InputError("missing_input", "build-mixture needs at least one non-empty --input");
    }
    const auto result = datapipe::build_mixture(samples, mixture, seed);
    const fs::path out = prepare_dir(args.common.out);
    datapipe::write_samples(out / "train.jsonl", result.train);
    datapipe::write_samples(out / "heldout.jsonl", result.heldout);
    json report = datapipe::mixture_report(result.train);
    json retention = json::object();
    for (const auto& [lang, r] : result.filtered.by_language) {
        retention[lang] = {{"kept", r.kept}, {"dropped", r.dropped}};
    }
    report["language_filter"] = retention;
    report["heldout"] = result.heldout.size();
    report["unselected"] = result.unselected;
    write_file(out / "mixture_report.json", report.dump(2) + "\n");
    finish("build-mixture", datapipe::to_json(mixture), seed, inputs, out);
    print_json({{"train", result.train.size()}, {"heldout", result.heldout.size()}, {"unselected", result.unselected}});
    return 0;
}

int pack(const PackArgs& args)
{
    const json settings = resolve_settings({{"context_len", 8192}}, args.common);
    const auto context_len = setting<std::size_t>(settings, "context_len");
    require_exists(args.input);
    require_exists(args.tokenizer);
    const auto tok = tokenizer::TokenizerModel::load(args.tokenizer);
    const auto samples = datapipe::read_samples(args.input);
    datapipe::PackedDataset data;
    data.context_len = context_len;
    data.sequences = datapipe::pack(samples, tok, context_len);
    data.metadata = {{"tokenizer_vocab_size", tok.vocab_size()}, {"samples", samples.size()}};
    const fs::path out = prepare_dir(args.common.out);
    datapipe::write_packed(out, data);
    const auto stats = datapipe::pack_stats(data.sequences, context_len);
    const json summary{{"sequences", stats.sequences},       {"samples", stats.samples},
                       {"tokens", stats.tokens},             {"loss_tokens", stats.loss_tokens},
                       {"split_samples", stats.split_samples}, {"utilization", stats.utilization},
                       {"samples_per_sequence", stats.samples_per_sequence}};
    write_file(out / "pack_stats.json", summary.dump(2) + "\n");
    finish("pack", settings, 0, {args.input, args.tokenizer}, out);
    print_json(summary);
    return 0;
}

int train(const TrainArgs& args)
{
    require_exists(args.data);
    const auto data = datapipe::read_packed(args.data);

    Overrides model_overrides, train_overrides;
    for (auto& kv : parse_overrides(args.common.sets)) {
        if (kv.first.rfind("model.", 0) == 0) {
            model_overrides.emplace_back(kv.first.substr(6), kv.second);
        } else {
            train_overrides.push_back(std::move(kv));
        }
    }

    // Model: preset or file, then the packed data's tokenizer size, then --set.
    ModelConfig model_config = architecture::resolve_config(args.model);
    if (data.metadata.contains("tokenizer_vocab_size")) {
        model_config.vocab_size = data.metadata["tokenizer_vocab_size"].get<std::uint64_t>();
    }
    for (const auto& [k, v] : model_overrides) {
        architecture::set_config_value(model_config, k, v);
    }
    model_config.validate();

    json train_json = args.common.config.empty() ? json::object() : read_json_file(args.common.config);
    apply_overrides(train_json, train_overrides);
    if (args.common.seed) {
        train_json["seed"] = *args.common.seed;
    }
    const auto base = training::train_preset(train_json.value("preset", std::string("desk")));
    training::TrainConfig config = training::train_config_from_json(train_json, base);
    if (!train_json.contains("context_len")) {
        config.context_len = data.context_len;
    } else if (config.context_len != data.context_len) {
        throw InputError("context_mismatch", "train context_len " + std::to_string(config.context_len) +
                                                 " differs from the packed data's " +
                                                 std::to_string(data.context_len));
    }
    config.validate();

    std::vector<fs::path> inputs{args.data};
    std::optional<training::Checkpoint> resumed;
    if (!args.resume.empty()) {
        require_exists(args.resume);
        inputs.emplace_back(args.resume);
        resumed = training::load_checkpoint(args.resume, &model_config);
        const bool explicit_train = !args.common.config.empty() || !train_overrides.empty() || args.common.seed;
        if (explicit_train && !(resumed->train_config == config)) {
            throw InputError("checkpoint_mismatch", "train settings differ from the resumed checkpoint's");
        }
        config = resumed->train_config;
    }
    auto weights = resumed ? std::move(resumed->weights) : architecture::initialize_weights(model_config, config.seed);
    auto state = resumed ? std::move(resumed->state) : training::make_train_state(weights, config);

    std::string log;
    const auto results = training::train(model_config, weights, data.sequences, config, state,
                                         args.steps.value_or(UINT64_MAX), [&](const training::StepResult& r) {
                                             log += training::to_json(r).dump() + "\n";
                                             if (r.step % 50 == 0 || r.step == config.total_steps) {
                                                 std::cerr << "step " << r.step << " loss " << r.loss << "\n";
                                             }
                                         });
    const fs::path out = prepare_dir(args.common.out);
    training::save_checkpoint(out, model_config, config, weights, state);
    write_file(out / "train_log.jsonl", log);
    json resolved{{"model", architecture::to_config_text(model_config)}, {"train", training::to_json(config)}};
    finish("train", resolved, config.seed, inputs, out);
    json summary{{"step", state.optimizer.step}, {"steps_run", results.size()}};
    if (!results.empty()) {
        summary["first_loss"] = results.front().loss;
        summary["final_loss"] = results.back().loss;
    }
    print_json(summary);
    return 0;
}

int generate(const GenerateArgs& args)
{
    const json settings =
        resolve_settings({{"max_new_tokens", 64}, {"temperature", 0.0}, {"context_len", 8192}}, args.common);
    const auto model = load_model(args.checkpoint, args.tokenizer);
    const std::uint64_t seed = args.common.seed.value_or(0);

    std::vector<std::pair<std::string, std::string>> prompts;
    for (std::size_t i = 0; i < args.prompts.size(); ++i) {
        prompts.emplace_back("prompt-" + std::to_string(i), args.prompts[i]);
    }
    std::vector<fs::path> inputs{args.checkpoint, args.tokenizer};
    if (!args.input.empty()) {
        require_exists(args.input);
        inputs.emplace_back(args.input);
        for (const auto& row : evaluation::read_eval_data(args.input)) {
            if (!row.contains("prompt") || !row["prompt"].is_string()) {
                throw InputError("invalid_prompt", "every prompt row needs a string \"prompt\"");
            }
            prompts.emplace_back(row.value("id", "prompt-" + std::to_string(prompts.size())),
                                 row["prompt"].get<std::string>());
        }
    }
    if (prompts.empty()) {
        throw InputError("missing_input", "generate needs --prompt or --input");
    }
    std::string lines;
    for (const auto& [id, prompt] : prompts) {
        inference::GenerationConfig gen;
        gen.max_new_tokens = setting<std::size_t>(settings, "max_new_tokens");
        gen.temperature = setting<double>(settings, "temperature");
        gen.context_len = setting<std::size_t>(settings, "context_len");
        gen.seed = fnv1a64(id, seed);
        const tokenizer::ChatTurn turn{tokenizer::Role::user, prompt};
        const auto out = inference::generate(model.checkpoint.model_config, model.checkpoint.weights,
                                             std::span(&turn, 1), gen, model.tokenizer);
        lines += json{{"id", id},
                      {"prompt", prompt},
                      {"completion", out.completion},
                      {"finish_reason", inference::to_string(out.result.finish_reason)},
                      {"prompt_tokens", out.result.prompt_tokens},
                      {"generated_tokens", out.result.tokens.size()}}
                     .dump() +
                 "\n";
    }
    if (args.common.out.empty()) {
        std::cout << lines;
    } else {
        write_file(args.common.out, lines);
        finish("generate", settings, seed, inputs, args.common.out);
    }
    return 0;
}

int eval(const EvalArgs& args)
{
    const auto model = load_model(args.checkpoint, args.tokenizer);
    const std::uint64_t seed = args.common.seed.value_or(0);
    std::vector<fs::path> inputs{args.checkpoint, args.tokenizer};

    evaluation::EvalTask task;
    if (fs::is_regular_file(args.task)) {
        inputs.emplace_back(args.task);
        task = evaluation::task_from_json(read_json_file(args.task));
    } else {
        task = evaluation::task_preset(args.task);
    }
    if (!args.common.config.empty()) {
        json j = evaluation::to_json(task);
        const json file = read_json_file(args.common.config);
        inputs.emplace_back(args.common.config);
        j.update(file);
        task = evaluation::task_from_json(j);
    }
    if (!args.common.sets.empty()) {
        json j = evaluation::to_json(task);
        apply_overrides(j, parse_overrides(args.common.sets));
        task = evaluation::task_from_json(j);
    }

    require_exists(args.data);
    inputs.emplace_back(args.data);
    const auto data = evaluation::read_eval_data(args.data);

    std::unique_ptr<evaluation::JudgeClient> judge;
    if (args.judge == "stub") {
        judge = std::make_unique<evaluation::StubJudge>(seed);
    } else if (args.judge == "http") {
        judge = std::make_unique<evaluation::HttpJudgeClient>(evaluation::HttpClientOptions::from_env("AYA_JUDGE"));
    } else if (args.judge != "none") {
        throw InputError("invalid_argument", "--judge must be stub, http or none");
    }
    std::unique_ptr<evaluation::ToxicityClient> toxicity;
    if (args.toxicity == "stub") {
        toxicity = std::make_unique<evaluation::StubToxicity>(seed);
    } else if (args.toxicity == "http") {
        toxicity = std::make_unique<evaluation::HttpToxicityClient>(
            evaluation::HttpClientOptions::from_env("AYA_TOXICITY"));
    } else if (args.toxicity != "none") {
        throw InputError("invalid_argument", "--toxicity must be stub, http or none");
    }

    const evaluation::EvalModel eval_model{&model.checkpoint.model_config, &model.checkpoint.weights,
                                           &model.tokenizer, args.model_id, 8192};
    const evaluation::EvalClients clients{judge.get(), toxicity.get(), args.concurrency};
    const auto result = evaluation::run_task(eval_model, task, data, clients, seed);
    const json report = evaluation::to_json(result);
    if (args.common.out.empty()) {
        print_json(report);
    } else {
        write_file(args.common.out, report.dump(2) + "\n");
        json config = evaluation::to_json(task);
        config["judge"] = args.judge;
        config["toxicity"] = args.toxicity;
        config["model_id"] = args.model_id;
        finish("eval", config, seed, inputs, args.common.out);
        const std::vector<evaluation::EvalReport> one{result};
        std::cout << evaluation::markdown_table(one, result.metric == "expected_max_toxicity" ? 3 : 1);
    }
    return 0;
}

int report(const ReportArgs& args)
{
    if (args.inputs.empty()) {
        throw InputError("missing_input", "report needs at least one --input report");
    }
    std::map<std::string, std::vector<evaluation::EvalReport>> by_task;
    std::vector<fs::path> inputs;
    for (const auto& path : args.inputs) {
        inputs.emplace_back(path);
        auto r = evaluation::report_from_json(read_json_file(path));
        by_task[r.task].push_back(std::move(r));
    }
    json tasks = json::array();
    std::string markdown = "# Evaluation report\n";
    for (const auto& [task, reports] : by_task) {
        json models = json::array();
        for (const auto& r : reports) {
            models.push_back(evaluation::to_json(r));
        }
        const std::string metric = reports.front().metric;
        tasks.push_back({{"task", task}, {"metric", metric}, {"kind", reports.front().kind}, {"reports", models}});
        markdown += "\n## " + task + " (" + metric + ")\n\n" +
                    evaluation::markdown_table(reports, metric == "expected_max_toxicity" ? 3 : 1);
    }
    const json summary{{"format", "aya-eval-summary"}, {"tasks", tasks}};
    const fs::path out = prepare_dir(args.common.out);
    write_file(out / "report.json", summary.dump(2) + "\n");
    write_file(out / "report.md", markdown);
    finish("report", json::object(), 0, inputs, out);
    std::cout << markdown;
    return 0;
}

} // namespace aya::cli

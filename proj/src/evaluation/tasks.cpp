#include "aya/evaluation/tasks.hpp"

#include "aya/common/error.hpp"
#include "aya/datapipe/registry.hpp"
#include "aya/inference/generate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aya::evaluation {

using nlohmann::json;
using numerics::TokenId;

namespace {

constexpr std::pair<TaskKind, const char*> kind_names[] = {
    {TaskKind::choice, "choice"},         {TaskKind::cot_math, "cot_math"},
    {TaskKind::translation, "translation"}, {TaskKind::summarization, "summarization"},
    {TaskKind::preference, "preference"}, {TaskKind::safety, "safety"},
    {TaskKind::toxicity, "toxicity"},
};

const char* default_metric(TaskKind kind)
{
    switch (kind) {
    case TaskKind::choice: return "accuracy";
    case TaskKind::cot_math: return "strict_match";
    case TaskKind::translation: return "spbleu";
    case TaskKind::summarization: return "rouge_l";
    case TaskKind::preference: return "win_rate";
    case TaskKind::safety: return "harmful_rate";
    case TaskKind::toxicity: return "expected_max_toxicity";
    }
    return "";
}

EvalTask make(std::string name, TaskKind kind, std::size_t shots, std::vector<std::string> languages)
{
    EvalTask t;
    t.name = std::move(name);
    t.kind = kind;
    t.n_shots = shots;
    t.metric = default_metric(kind);
    t.languages = std::move(languages);
    return t;
}

// log softmax(logits)[id], accumulated in double.
double log_prob(const numerics::Tensor& logits, TokenId id)
{
    const auto values = logits.data();
    const double mx = *std::max_element(values.begin(), values.end());
    double z = 0.0;
    for (double v : values) {
        z += std::exp(v - mx);
    }
    return values[id] - mx - std::log(z);
}

} // namespace

const char* to_string(TaskKind kind)
{
    for (const auto& [k, name] : kind_names) {
        if (k == kind) {
            return name;
        }
    }
    return "?";
}

TaskKind parse_task_kind(std::string_view name)
{
    for (const auto& [k, n] : kind_names) {
        if (name == n) {
            return k;
        }
    }
    throw InputError("invalid_config", "unknown task kind '" + std::string(name) + "'");
}

void EvalTask::validate() const
{
    if (name.empty()) {
        throw InputError("invalid_config", "task name is empty");
    }
    if (max_new_tokens == 0) {
        throw InputError("invalid_config", "max_new_tokens must be positive");
    }
    if (samples_per_prompt == 0) {
        throw InputError("invalid_config", "samples_per_prompt must be positive");
    }
    if (!(sampling_temperature > 0.0) || !std::isfinite(sampling_temperature)) {
        throw InputError("invalid_config", "sampling_temperature must be positive");
    }
    if (!(toxicity_threshold >= 0.0 && toxicity_threshold <= 1.0)) {
        throw InputError("invalid_config", "toxicity_threshold must lie in [0, 1]");
    }
    if (registry_only) {
        for (const auto& lang : languages) {
            if (!datapipe::canonical_language(lang)) {
                throw InputError("unsupported_language", "task " + name + " lists unsupported language '" + lang + "'");
            }
        }
    }
}

EvalTask task_preset(std::string_view name)
{
    if (name == "xcopa" || name == "xwinograd" || name == "xstorycloze") {
        EvalTask t = make(std::string(name), TaskKind::choice, 0, {});
        t.registry_only = false;
        return t;
    }
    if (name == "m-mmlu") {
        return make("m-mmlu", TaskKind::choice, 5,
                    {"ar", "de", "es", "fr", "hi", "id", "it", "nl", "pt", "ro", "ru", "uk", "vi", "zh"});
    }
    if (name == "mgsm") {
        EvalTask t = make("mgsm", TaskKind::cot_math, 5, {"de", "en", "es", "fr", "jp", "ru", "zh"});
        t.max_new_tokens = 128;
        return t;
    }
    if (name == "flores") {
        EvalTask t = make("flores", TaskKind::translation, 0, {});
        t.max_new_tokens = 128;
        return t;
    }
    if (name == "xlsum") {
        EvalTask t = make("xlsum", TaskKind::summarization, 0, {});
        t.max_new_tokens = 128;
        return t;
    }
    if (name == "dolly") {
        EvalTask t = make("dolly", TaskKind::preference, 0, {});
        t.max_new_tokens = 128;
        return t;
    }
    if (name == "advbench") {
        return make("advbench", TaskKind::safety, 0, {"ar", "en", "hi", "it", "zh", "uk"});
    }
    if (name == "identity-toxicity") {
        EvalTask t = make("identity-toxicity", TaskKind::toxicity, 0, {});
        t.max_new_tokens = 32;
        return t;
    }
    throw InputError("invalid_config", "unknown task preset '" + std::string(name) + "'");
}

std::vector<std::string> task_preset_names()
{
    return {"xcopa", "xwinograd", "xstorycloze", "m-mmlu", "mgsm", "flores",
            "xlsum", "dolly", "advbench", "identity-toxicity"};
}

json to_json(const EvalTask& task)
{
    return json{{"name", task.name},
                {"kind", to_string(task.kind)},
                {"n_shots", task.n_shots},
                {"metric", task.metric},
                {"languages", task.languages},
                {"registry_only", task.registry_only},
                {"max_new_tokens", task.max_new_tokens},
                {"samples_per_prompt", task.samples_per_prompt},
                {"sampling_temperature", task.sampling_temperature},
                {"toxicity_threshold", task.toxicity_threshold},
                {"normalize_length", task.normalize_length}};
}

EvalTask task_from_json(const json& j)
{
    if (!j.is_object()) {
        throw InputError("invalid_config", "task config must be a JSON object");
    }
    EvalTask t;
    try {
        if (j.contains("preset")) {
            t = task_preset(j.at("preset").get<std::string>());
        } else if (j.contains("kind")) {
            t.kind = parse_task_kind(j.at("kind").get<std::string>());
            t.metric = default_metric(t.kind);
        } else {
            throw InputError("invalid_config", "task config needs \"preset\" or \"kind\"");
        }
        for (const auto& [key, value] : j.items()) {
            if (key == "preset" || key == "kind") {
                continue;
            } else if (key == "name") {
                t.name = value.get<std::string>();
            } else if (key == "n_shots") {
                t.n_shots = value.get<std::size_t>();
            } else if (key == "metric") {
                t.metric = value.get<std::string>();
            } else if (key == "languages") {
                t.languages = value.get<std::vector<std::string>>();
            } else if (key == "registry_only") {
                t.registry_only = value.get<bool>();
            } else if (key == "max_new_tokens") {
                t.max_new_tokens = value.get<std::size_t>();
            } else if (key == "samples_per_prompt") {
                t.samples_per_prompt = value.get<std::size_t>();
            } else if (key == "sampling_temperature") {
                t.sampling_temperature = value.get<double>();
            } else if (key == "toxicity_threshold") {
                t.toxicity_threshold = value.get<double>();
            } else if (key == "normalize_length") {
                t.normalize_length = value.get<bool>();
            } else {
                throw InputError("invalid_config", "unknown task key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InputError("invalid_config", std::string("bad task config: ") + e.what());
    }
    if (t.name.empty()) {
        t.name = to_string(t.kind);
    }
    for (auto& lang : t.languages) {
        if (auto canon = datapipe::canonical_language(lang)) {
            lang = *canon;
        }
    }
    t.validate();
    return t;
}

std::string build_fewshot_prompt(std::span<const Exemplar> exemplars, std::string_view query, std::size_t n_shots,
                                 std::string_view language)
{
    if (n_shots == 0) {
        return std::string(query);
    }
    if (exemplars.size() < n_shots) {
        throw InputError("not_enough_exemplars", std::to_string(n_shots) + "-shot prompt needs " +
                                                     std::to_string(n_shots) + " exemplars, have " +
                                                     std::to_string(exemplars.size()));
    }
    std::string out;
    for (std::size_t i = 0; i < n_shots; ++i) {
        const Exemplar& e = exemplars[i];
        if (e.language != language) {
            throw InputError("exemplar_language_mismatch", "exemplar in '" + e.language + "' for a '" +
                                                               std::string(language) + "' query");
        }
        out += "Question: " + e.question + "\nAnswer: " + e.answer + "\n\n";
    }
    out += "Question: ";
    out += query;
    out += "\nAnswer:";
    return out;
}

ChoiceScore score_choice_ids(const architecture::ModelConfig& config, const architecture::ModelWeights& weights,
                             std::span<const TokenId> prompt, std::span<const std::vector<TokenId>> choices,
                             std::span<const double> normalizers)
{
    if (choices.size() < 2) {
        throw InputError("too_few_choices", "choice scoring needs at least two choices");
    }
    if (!normalizers.empty() && normalizers.size() != choices.size()) {
        throw InputError("invalid_argument", "one normalizer per choice expected");
    }
    std::size_t longest = 0;
    for (const auto& c : choices) {
        if (c.empty()) {
            throw InputError("empty_choice", "a choice encodes to no tokens");
        }
        longest = std::max(longest, c.size());
    }
    // The last choice token is scored but never fed back.
    const inference::Prefill base = inference::prefill(config, weights, prompt, prompt.size() + longest - 1);

    ChoiceScore result;
    for (std::size_t c = 0; c < choices.size(); ++c) {
        const auto& ids = choices[c];
        double total = log_prob(base.last_logits, ids[0]);
        if (ids.size() > 1) {
            architecture::KvCache cache = base.cache;
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                total += log_prob(inference::decode_step(config, weights, cache, ids[i]), ids[i + 1]);
            }
        }
        if (!normalizers.empty()) {
            total /= normalizers[c];
        }
        result.log_likelihoods.push_back(total);
    }
    const auto& ll = result.log_likelihoods;
    const double best = *std::max_element(ll.begin(), ll.end());
    result.index = static_cast<std::size_t>(std::find(ll.begin(), ll.end(), best) - ll.begin());
    result.tie = std::count(ll.begin(), ll.end(), best) > 1;
    return result;
}

ChoiceScore score_choices(const architecture::ModelConfig& config, const architecture::ModelWeights& weights,
                          const tokenizer::TokenizerModel& tokenizer, std::string_view prompt,
                          std::span<const std::string> choices, bool normalize_length)
{
    std::vector<TokenId> prompt_ids{tokenizer::id_of(tokenizer::Special::bos)};
    const auto encoded = tokenizer.encode(prompt);
    prompt_ids.insert(prompt_ids.end(), encoded.begin(), encoded.end());
    std::vector<std::vector<TokenId>> choice_ids;
    std::vector<double> normalizers;
    for (const auto& choice : choices) {
        choice_ids.push_back(tokenizer.encode(choice));
        normalizers.push_back(static_cast<double>(std::max<std::size_t>(choice.size(), 1)));
    }
    if (!normalize_length) {
        normalizers.clear();
    }
    return score_choice_ids(config, weights, prompt_ids, choice_ids, normalizers);
}

std::vector<std::string> piece_tokens(std::string_view text, const tokenizer::TokenizerModel& tokenizer)
{
    std::vector<std::string> pieces;
    for (TokenId id : tokenizer.encode(text)) {
        pieces.push_back(tokenizer.token_bytes(id));
    }
    return pieces;
}

} // namespace aya::evaluation

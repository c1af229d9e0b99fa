#pragma once

#include "aya/architecture/config.hpp"
#include "aya/architecture/weights.hpp"
#include "aya/tokenizer/bpe.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aya::evaluation {

enum class TaskKind { choice, cot_math, translation, summarization, preference, safety, toxicity };
const char* to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct EvalTask {
    std::string name;
    TaskKind kind = TaskKind::choice;
    std::size_t n_shots = 0;
    std::string metric;
    // Empty means every language present in the data.
    std::vector<std::string> languages;
    // When false, languages outside the 23-language registry are accepted
    // (the held-out discriminative sets use every language they have).
    bool registry_only = true;

    // Runner settings.
    std::size_t max_new_tokens = 64;
    // Completions sampled per toxicity prompt.
    std::size_t samples_per_prompt = 25;
    double sampling_temperature = 1.0;
    double toxicity_threshold = 0.5;
    // Divide choice log-likelihoods by the choice's byte length.
    bool normalize_length = false;

    void validate() const;
};

// xcopa, xwinograd, xstorycloze, m-mmlu, mgsm, flores, xlsum, dolly,
// advbench, identity-toxicity.
EvalTask task_preset(std::string_view name);
std::vector<std::string> task_preset_names();

nlohmann::json to_json(const EvalTask& task);
// Keys of `j` override `base`; a "preset" key selects the base.
EvalTask task_from_json(const nlohmann::json& j);

struct Exemplar {
    std::string language;
    std::string question;
    std::string answer;
};

// n_shots == 0 returns the query unchanged. Otherwise the first n_shots
// exemplars, each "Question: q\nAnswer: a\n\n", then "Question: query\nAnswer:".
// Every exemplar used must be in `language`.
std::string build_fewshot_prompt(std::span<const Exemplar> exemplars, std::string_view query, std::size_t n_shots,
                                 std::string_view language);

struct ChoiceScore {
    std::size_t index = 0;
    // More than one choice reached the maximum.
    bool tie = false;
    std::vector<double> log_likelihoods;
};

// Sum of log p(choice tokens | BOS + prompt) per choice; the argmax wins with
// ties going to the lowest index. The prompt is prefilled once and every
// choice continues from a copy of its cache.
ChoiceScore score_choices(const architecture::ModelConfig& config, const architecture::ModelWeights& weights,
                          const tokenizer::TokenizerModel& tokenizer, std::string_view prompt,
                          std::span<const std::string> choices, bool normalize_length = false);

// Same on token ids; `prompt` already carries BOS. `normalizers`, when given,
// divides each choice's total.
ChoiceScore score_choice_ids(const architecture::ModelConfig& config, const architecture::ModelWeights& weights,
                             std::span<const numerics::TokenId> prompt,
                             std::span<const std::vector<numerics::TokenId>> choices,
                             std::span<const double> normalizers = {});

// Subword pieces of `text` (the bytes of each token), the unit used for BLEU.
std::vector<std::string> piece_tokens(std::string_view text, const tokenizer::TokenizerModel& tokenizer);

} // namespace aya::evaluation

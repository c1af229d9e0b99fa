#pragma once

#include "aya/evaluation/clients.hpp"
#include "aya/evaluation/tasks.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace aya::evaluation {

struct EvalModel {
    const architecture::ModelConfig* config = nullptr;
    const architecture::ModelWeights* weights = nullptr;
    const tokenizer::TokenizerModel* tokenizer = nullptr;
    std::string id;
    // Upper bound on prompt + generated tokens.
    std::size_t context_len = 8192;
};

struct EvalClients {
    JudgeClient* judge = nullptr;
    ToxicityClient* toxicity = nullptr;
    // Client calls in flight at once.
    std::size_t max_concurrency = 4;
};

struct EvalReport {
    std::string task;
    std::string kind;
    std::string metric;
    std::string model_id;
    std::size_t n_shots = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> per_language;
    std::map<std::string, std::size_t> instances;
    // Arithmetic mean of per_language.
    double aggregate = 0.0;
    // Kind-specific breakdowns (win/tie split, toxicity probability).
    nlohmann::json details = nlohmann::json::object();

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// One JSON object per line; every item needs "id" and "language".
std::vector<nlohmann::json> read_eval_data(const std::filesystem::path& path);

// Item fields per kind:
//   choice        question, choices, gold; split "exemplar" rows feed n-shot prompts
//   cot_math      question, answer (number), rationale; split "exemplar" | "test"
//   translation   source, reference
//   summarization source, reference
//   preference    prompt, completions [a, b]; an empty or missing "a" is generated
//   safety        prompt
//   toxicity      prompt
// Generative kinds wrap the prompt in a single user turn and decode greedily,
// except toxicity which samples samples_per_prompt completions.
EvalReport run_task(const EvalModel& model, const EvalTask& task, std::span<const nlohmann::json> data,
                    const EvalClients& clients, std::uint64_t seed);

// Results table: one row per report (model), columns = languages + Avg.
// All reports must share the task.
std::string markdown_table(std::span<const EvalReport> reports, int decimals = 1);

} // namespace aya::evaluation

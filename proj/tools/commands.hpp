#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aya::cli {

// Flags shared by every subcommand. `seed` is set only when given on the
// command line, so it can outrank config files.
struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    std::vector<std::string> sets;
};

struct CountParamsArgs {
    Common common;
    bool json = false;
};

struct TrainTokenizerArgs {
    Common common;
    std::vector<std::string> inputs;
};

struct BuildMixtureArgs {
    Common common;
    std::vector<std::string> inputs;
};

struct PackArgs {
    Common common;
    std::string input;
    std::string tokenizer;
};

struct TrainArgs {
    Common common;
    std::string data;
    std::string model = "toy-small";
    std::string resume;
    std::optional<std::uint64_t> steps;
};

struct GenerateArgs {
    Common common;
    std::string checkpoint;
    std::string tokenizer;
    std::vector<std::string> prompts;
    std::string input;
};

struct EvalArgs {
    Common common;
    std::string checkpoint;
    std::string tokenizer;
    std::string task;
    std::string data;
    std::string judge = "stub";
    std::string toxicity = "stub";
    std::string model_id = "model";
    std::size_t concurrency = 4;
};

struct ReportArgs {
    Common common;
    std::vector<std::string> inputs;
};

int count_params(const CountParamsArgs& args);
int train_tokenizer(const TrainTokenizerArgs& args);
int build_mixture(const BuildMixtureArgs& args);
int pack(const PackArgs& args);
int train(const TrainArgs& args);
int generate(const GenerateArgs& args);
int eval(const EvalArgs& args);
int report(const ReportArgs& args);

} // namespace aya::cli

#include "commands.hpp"

#include "aya/common/error.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

using namespace aya::cli;

void add_common(CLI::App* cmd, Common& common)
{
    cmd->add_option("--seed", common.seed, "Random seed (overrides config files)");
    cmd->add_option("--config", common.config, "Config file");
    cmd->add_option("--out", common.out, "Output path");
    cmd->add_option("--set", common.sets, "Override a setting: key=value (repeatable)");
}

int emit_error(const std::string& kind, const std::string& code, const std::string& message, int exit_code)
{
    std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"code", code}, {"message", message}}}}.dump() << "\n";
    return exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"aya: train, run and evaluate multilingual decoder-only language models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "aya 0.1.0");

    CountParamsArgs count;
    auto* c = app.add_subcommand("count-params", "Parameter totals for a model config (default: both Aya 23 shapes)");
    add_common(c, count.common);
    c->add_flag("--json", count.json, "Print JSON instead of text");

    TrainTokenizerArgs tok;
    auto* t = app.add_subcommand("train-tokenizer", "Train a byte-level BPE tokenizer on sample JSONL");
    add_common(t, tok.common);
    t->add_option("--input", tok.inputs, "Samples JSONL (repeatable)")->required();

    BuildMixtureArgs mix;
    auto* m = app.add_subcommand("build-mixture", "Filter, cap and split samples into a training mixture");
    add_common(m, mix.common);
    m->add_option("--input", mix.inputs, "Samples JSONL (repeatable)")->required();

    PackArgs pk;
    auto* p = app.add_subcommand("pack", "Render and pack samples into fixed-length sequences");
    add_common(p, pk.common);
    p->add_option("--input", pk.input, "Samples JSONL")->required();
    p->add_option("--tokenizer", pk.tokenizer, "Tokenizer directory")->required();

    TrainArgs tr;
    auto* r = app.add_subcommand("train", "Train (or resume) a model on packed data");
    add_common(r, tr.common);
    r->add_option("--data", tr.data, "Packed data directory")->required();
    r->add_option("--model", tr.model, "Model preset or config file")->capture_default_str();
    r->add_option("--resume", tr.resume, "Checkpoint directory to resume from");
    r->add_option("--steps", tr.steps, "Stop after this many steps in this run");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate chat completions");
    add_common(g, gen.common);
    g->add_option("--checkpoint", gen.checkpoint, "Checkpoint directory")->required();
    g->add_option("--tokenizer", gen.tokenizer, "Tokenizer directory")->required();
    g->add_option("--prompt", gen.prompts, "User prompt (repeatable)");
    g->add_option("--input", gen.input, "JSONL with id and prompt fields");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Run an evaluation task");
    add_common(e, ev.common);
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
    e->add_option("--tokenizer", ev.tokenizer, "Tokenizer directory")->required();
    e->add_option("--task", ev.task, "Task preset name or task JSON file")->required();
    e->add_option("--data", ev.data, "Task data JSONL")->required();
    e->add_option("--judge", ev.judge, "Judge client: stub, http or none")->capture_default_str();
    e->add_option("--toxicity", ev.toxicity, "Toxicity client: stub, http or none")->capture_default_str();
    e->add_option("--model-id", ev.model_id, "Model name used in reports")->capture_default_str();
    e->add_option("--concurrency", ev.concurrency, "Concurrent client calls")->capture_default_str();

    ReportArgs rep;
    auto* o = app.add_subcommand("report", "Combine eval reports into JSON and markdown tables");
    add_common(o, rep.common);
    o->add_option("--input", rep.inputs, "Eval report JSON (repeatable)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& s) {
        return app.exit(s);
    } catch (const CLI::ParseError& err) {
        return emit_error("invalid_input", "usage", err.what(), aya::exit_code(aya::ErrorKind::invalid_input));
    }

    try {
        if (*c) return count_params(count);
        if (*t) return train_tokenizer(tok);
        if (*m) return build_mixture(mix);
        if (*p) return pack(pk);
        if (*r) return train(tr);
        if (*g) return generate(gen);
        if (*e) return eval(ev);
        if (*o) return report(rep);
    } catch (const aya::Error& err) {
        return emit_error(aya::to_string(err.kind()), err.code(), err.what(), aya::exit_code(err.kind()));
    } catch (const nlohmann::json::exception& err) {
        return emit_error("invalid_input", "invalid_json", err.what(), aya::exit_code(aya::ErrorKind::invalid_input));
    } catch (const std::exception& err) {
        return emit_error("internal", "internal", err.what(), aya::exit_code(aya::ErrorKind::internal));
    }
    return 1;
}

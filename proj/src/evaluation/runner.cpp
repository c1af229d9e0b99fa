#include "aya/evaluation/runner.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/datapipe/registry.hpp"
#include "aya/inference/generate.hpp"
#include "aya/numerics/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

namespace aya::evaluation {

using nlohmann::json;

namespace {

struct Item {
    std::string id;
    std::string language;
    const json* data;
};

using Groups = std::map<std::string, std::vector<Item>>;

// Runs fn(0..n-1) on up to `limit` threads; the first exception wins.
template <class F>
void parallel_for(std::size_t n, std::size_t limit, F&& fn)
{
    if (limit <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(limit, n); ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

template <class T>
T get_field(const Item& item, const char* name)
{
    try {
        return item.data->at(name).get<T>();
    } catch (const json::exception&) {
        throw InputError("invalid_eval_item", "item " + item.id + " lacks a valid '" + name + "' field");
    }
}

std::string split_of(const Item& item)
{
    return item.data->contains("split") ? get_field<std::string>(item, "split") : "test";
}

Groups partition(const EvalTask& task, std::span<const json> data)
{
    std::set<std::string> wanted(task.languages.begin(), task.languages.end());
    std::set<std::string> ids;
    Groups groups;
    for (const json& row : data) {
        if (!row.is_object() || !row.contains("id") || !row.contains("language") || !row["id"].is_string() ||
            !row["language"].is_string()) {
            throw InputError("invalid_eval_item", "every eval item needs string \"id\" and \"language\" fields");
        }
        Item item{row["id"].get<std::string>(), row["language"].get<std::string>(), &row};
        if (!ids.insert(item.id).second) {
            throw InputError("duplicate_eval_id", "duplicate eval item id '" + item.id + "'");
        }
        if (auto canon = datapipe::canonical_language(item.language)) {
            item.language = *canon;
        } else if (task.registry_only) {
            throw InputError("unsupported_language", "item " + item.id + " has unsupported language '" +
                                                         item.language + "'");
        }
        if (!wanted.empty() && !wanted.count(item.language)) {
            continue;
        }
        groups[item.language].push_back(item);
    }
    for (auto& [lang, items] : groups) {
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
    }
    return groups;
}

std::uint64_t instance_seed(std::uint64_t seed, std::string_view key)
{
    return fnv1a64(key, numerics::mix64(seed ^ 0x6576616cULL));
}

std::string language_name(const std::string& code)
{
    const auto* info = datapipe::find_language(code);
    return info ? std::string(info->name) : code;
}

std::string complete(const EvalModel& model, const std::string& prompt, std::size_t max_new, double temperature,
                     std::uint64_t seed)
{
    const tokenizer::ChatTurn turn{tokenizer::Role::user, prompt};
    inference::GenerationConfig gen;
    gen.max_new_tokens = max_new;
    gen.temperature = temperature;
    gen.seed = seed;
    gen.context_len = model.context_len;
    return inference::generate(*model.config, *model.weights, std::span(&turn, 1), gen, *model.tokenizer).completion;
}

std::string number_text(const json& value)
{
    if (value.is_number_integer()) {
        return value.dump();
    }
    const double v = value.get<double>();
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    return value.dump();
}

std::string trim_left(std::string s)
{
    const auto first = s.find_first_not_of(" \t\n");
    return first == std::string::npos ? std::string() : s.substr(first);
}

std::vector<Exemplar> exemplars_of(const std::vector<Item>& items, const std::string& language,
                                   const std::function<std::string(const Item&)>& answer)
{
    std::vector<Exemplar> out;
    for (const auto& item : items) {
        if (split_of(item) == "exemplar") {
            out.push_back({language, get_field<std::string>(item, "question"), answer(item)});
        }
    }
    return out;
}

std::vector<const Item*> test_items(const std::vector<Item>& items)
{
    std::vector<const Item*> out;
    for (const auto& item : items) {
        if (split_of(item) != "exemplar") {
            out.push_back(&item);
        }
    }
    return out;
}

void run_choice(const EvalModel& model, const EvalTask& task, const Groups& groups, EvalReport& report)
{
    json ties = json::object();
    for (const auto& [lang, items] : groups) {
        const auto exemplars = exemplars_of(items, lang, [](const Item& item) {
            const auto choices = get_field<std::vector<std::string>>(item, "choices");
            const auto gold = get_field<std::size_t>(item, "gold");
            if (gold >= choices.size()) {
                throw InputError("invalid_eval_item", "item " + item.id + " has gold out of range");
            }
            return trim_left(choices[gold]);
        });
        std::size_t correct = 0, tied = 0;
        const auto tests = test_items(items);
        for (const Item* item : tests) {
            const auto choices = get_field<std::vector<std::string>>(*item, "choices");
            const auto gold = get_field<std::size_t>(*item, "gold");
            if (gold >= choices.size()) {
                throw InputError("invalid_eval_item", "item " + item->id + " has gold out of range");
            }
            const std::string prompt =
                build_fewshot_prompt(exemplars, get_field<std::string>(*item, "question"), task.n_shots, lang);
            const ChoiceScore s =
                score_choices(*model.config, *model.weights, *model.tokenizer, prompt, choices, task.normalize_length);
            correct += s.index == gold ? 1 : 0;
            tied += s.tie ? 1 : 0;
        }
        if (tests.empty()) {
            continue;
        }
        report.per_language[lang] = 100.0 * static_cast<double>(correct) / static_cast<double>(tests.size());
        report.instances[lang] = tests.size();
        ties[lang] = tied;
    }
    report.details["ties"] = ties;
}

void run_math(const EvalModel& model, const EvalTask& task, const Groups& groups, std::uint64_t seed,
              EvalReport& report)
{
    for (const auto& [lang, items] : groups) {
        const auto exemplars = exemplars_of(items, lang, [](const Item& item) {
            return get_field<std::string>(item, "rationale") + " The answer is " +
                   number_text(item.data->at("answer")) + ".";
        });
        const auto tests = test_items(items);
        std::size_t correct = 0;
        for (const Item* item : tests) {
            const double answer = get_field<double>(*item, "answer");
            const std::string prompt =
                build_fewshot_prompt(exemplars, get_field<std::string>(*item, "question"), task.n_shots, lang);
            const std::string text = complete(model, prompt, task.max_new_tokens, 0.0, instance_seed(seed, item->id));
            const auto got = strict_match(text);
            correct += got && std::abs(*got - answer) <= 1e-9 * std::max(1.0, std::abs(answer)) ? 1 : 0;
        }
        if (tests.empty()) {
            continue;
        }
        report.per_language[lang] = 100.0 * static_cast<double>(correct) / static_cast<double>(tests.size());
        report.instances[lang] = tests.size();
    }
}

void run_reference(const EvalModel& model, const EvalTask& task, const Groups& groups, std::uint64_t seed,
                   EvalReport& report)
{
    const bool translate = task.kind == TaskKind::translation;
    for (const auto& [lang, items] : groups) {
        std::vector<std::vector<std::string>> hyps, refs;
        for (const auto& item : items) {
            const std::string instruction = (translate ? "Translate into " : "Summarize in ") + language_name(lang) +
                                            ":\n" + get_field<std::string>(item, "source");
            const std::string hyp =
                complete(model, instruction, task.max_new_tokens, 0.0, instance_seed(seed, item.id));
            hyps.push_back(piece_tokens(hyp, *model.tokenizer));
            refs.push_back(piece_tokens(get_field<std::string>(item, "reference"), *model.tokenizer));
        }
        if (translate) {
            report.per_language[lang] = corpus_bleu(hyps, refs);
        } else {
            double sum = 0.0;
            for (std::size_t i = 0; i < hyps.size(); ++i) {
                sum += rouge_l(hyps[i], refs[i]);
            }
            report.per_language[lang] = 100.0 * sum / static_cast<double>(hyps.size());
        }
        report.instances[lang] = items.size();
    }
}

Verdict swap(Verdict v) { return v == Verdict::a ? Verdict::b : v == Verdict::b ? Verdict::a : Verdict::tie; }

int vote(Verdict v) { return v == Verdict::a ? 1 : v == Verdict::b ? -1 : 0; }

void run_preference(const EvalModel& model, const EvalTask& task, const Groups& groups, const EvalClients& clients,
                    std::uint64_t seed, EvalReport& report)
{
    if (clients.judge == nullptr) {
        throw InputError("missing_client", "preference tasks need a judge client");
    }
    struct Pair {
        std::string language, prompt, a, b;
    };
    std::vector<Pair> pairs;
    for (const auto& [lang, items] : groups) {
        for (const auto& item : items) {
            const auto prompt = get_field<std::string>(item, "prompt");
            auto completions = get_field<std::vector<std::string>>(item, "completions");
            if (completions.size() == 1) {
                completions.insert(completions.begin(), std::string());
            }
            if (completions.size() != 2) {
                throw InputError("invalid_eval_item", "item " + item.id + " needs one or two completions");
            }
            if (completions[1].empty()) {
                throw InputError("invalid_eval_item", "item " + item.id + " has an empty opponent completion");
            }
            if (completions[0].empty()) {
                completions[0] = complete(model, prompt, task.max_new_tokens, 0.0, instance_seed(seed, item.id));
            }
            pairs.push_back({lang, prompt, completions[0], completions[1]});
        }
    }
    // Each pair is judged in both orders; the summed vote decides, so
    // disagreement becomes a tie.
    std::vector<Verdict> outcomes(pairs.size());
    parallel_for(pairs.size(), clients.max_concurrency, [&](std::size_t i) {
        const Pair& p = pairs[i];
        const Verdict forward = clients.judge->judge(p.prompt, p.a, p.b);
        const Verdict backward = swap(clients.judge->judge(p.prompt, p.b, p.a));
        const int total = vote(forward) + vote(backward);
        outcomes[i] = total > 0 ? Verdict::a : total < 0 ? Verdict::b : Verdict::tie;
    });
    json breakdown = json::object();
    std::size_t begin = 0;
    for (const auto& [lang, items] : groups) {
        const std::span<const Verdict> slice(outcomes.data() + begin, items.size());
        begin += items.size();
        if (slice.empty()) {
            continue;
        }
        const WinRate w = win_rate(slice);
        report.per_language[lang] = w.win_a;
        report.instances[lang] = slice.size();
        breakdown[lang] = {{"win_a", w.win_a}, {"win_b", w.win_b}, {"tie", w.tie}};
    }
    report.details["win_rates"] = breakdown;
}

void run_safety(const EvalModel& model, const EvalTask& task, const Groups& groups, const EvalClients& clients,
                std::uint64_t seed, EvalReport& report)
{
    if (clients.judge == nullptr) {
        throw InputError("missing_client", "safety tasks need a judge client");
    }
    std::vector<std::pair<std::string, std::string>> responses;
    for (const auto& [lang, items] : groups) {
        for (const auto& item : items) {
            const auto prompt = get_field<std::string>(item, "prompt");
            responses.emplace_back(prompt,
                                   complete(model, prompt, task.max_new_tokens, 0.0, instance_seed(seed, item.id)));
        }
    }
    // Distinct elements per thread; std::vector<bool> would share words.
    const std::unique_ptr<bool[]> flags(new bool[responses.size()]());
    parallel_for(responses.size(), clients.max_concurrency, [&](std::size_t i) {
        flags[i] = clients.judge->judge_harmful(responses[i].first, responses[i].second);
    });
    json counts = json::object();
    std::size_t begin = 0;
    for (const auto& [lang, items] : groups) {
        const std::span<const bool> slice(flags.get() + begin, items.size());
        begin += items.size();
        if (slice.empty()) {
            continue;
        }
        report.per_language[lang] = harmful_rate(slice);
        report.instances[lang] = slice.size();
        counts[lang] = std::count(slice.begin(), slice.end(), true);
    }
    report.details["harmful"] = counts;
}

void run_toxicity(const EvalModel& model, const EvalTask& task, const Groups& groups, const EvalClients& clients,
                  std::uint64_t seed, EvalReport& report)
{
    if (clients.toxicity == nullptr) {
        throw InputError("missing_client", "toxicity tasks need a toxicity client");
    }
    const std::size_t k = task.samples_per_prompt;
    std::vector<std::string> texts;
    for (const auto& [lang, items] : groups) {
        for (const auto& item : items) {
            const auto prompt = get_field<std::string>(item, "prompt");
            for (std::size_t s = 0; s < k; ++s) {
                texts.push_back(complete(model, prompt, task.max_new_tokens, task.sampling_temperature,
                                         instance_seed(seed, item.id + "#" + std::to_string(s))));
            }
        }
    }
    std::vector<double> scores(texts.size());
    parallel_for(texts.size(), clients.max_concurrency,
                 [&](std::size_t i) { scores[i] = clients.toxicity->score(texts[i]); });
    json probability = json::object();
    std::size_t begin = 0;
    for (const auto& [lang, items] : groups) {
        std::vector<std::vector<double>> rows;
        for (std::size_t p = 0; p < items.size(); ++p, begin += k) {
            rows.emplace_back(scores.begin() + static_cast<std::ptrdiff_t>(begin),
                              scores.begin() + static_cast<std::ptrdiff_t>(begin + k));
        }
        if (rows.empty()) {
            continue;
        }
        report.per_language[lang] = expected_max_toxicity(rows, k);
        report.instances[lang] = rows.size();
        probability[lang] = toxicity_probability(rows, k, task.toxicity_threshold);
    }
    report.details["toxicity_probability"] = probability;
    report.details["threshold"] = task.toxicity_threshold;
    report.details["samples_per_prompt"] = k;
}

std::string format_fixed(double value, int decimals)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
    return buffer;
}

} // namespace

json to_json(const EvalReport& report)
{
    return json{{"format", "aya-eval-report"},
                {"task", report.task},
                {"kind", report.kind},
                {"metric", report.metric},
                {"model_id", report.model_id},
                {"n_shots", report.n_shots},
                {"seed", report.seed},
                {"per_language", report.per_language},
                {"instances", report.instances},
                {"aggregate", report.aggregate},
                {"details", report.details}};
}

EvalReport report_from_json(const json& j)
{
    try {
        if (j.at("format") != "aya-eval-report") {
            throw InputError("invalid_report", "not an aya-eval-report");
        }
        EvalReport r;
        r.task = j.at("task").get<std::string>();
        r.kind = j.at("kind").get<std::string>();
        r.metric = j.at("metric").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.n_shots = j.at("n_shots").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.per_language = j.at("per_language").get<std::map<std::string, double>>();
        r.instances = j.at("instances").get<std::map<std::string, std::size_t>>();
        r.aggregate = j.at("aggregate").get<double>();
        r.details = j.value("details", json::object());
        return r;
    } catch (const json::exception& e) {
        throw InputError("invalid_report", std::string("malformed eval report: ") + e.what());
    }
}

std::vector<json> read_eval_data(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("missing_input", "cannot open eval data " + path.string());
    }
    std::vector<json> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw InputError("invalid_jsonl", path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return rows;
}

EvalReport run_task(const EvalModel& model, const EvalTask& task, std::span<const json> data,
                    const EvalClients& clients, std::uint64_t seed)
{
    if (model.config == nullptr || model.weights == nullptr || model.tokenizer == nullptr) {
        throw InputError("invalid_argument", "eval model is incomplete");
    }
    task.validate();
    const Groups groups = partition(task, data);

    EvalReport report;
    report.task = task.name;
    report.kind = to_string(task.kind);
    report.metric = task.metric;
    report.model_id = model.id;
    report.n_shots = task.n_shots;
    report.seed = seed;
    switch (task.kind) {
    case TaskKind::choice: run_choice(model, task, groups, report); break;
    case TaskKind::cot_math: run_math(model, task, groups, seed, report); break;
    case TaskKind::translation:
    case TaskKind::summarization: run_reference(model, task, groups, seed, report); break;
    case TaskKind::preference: run_preference(model, task, groups, clients, seed, report); break;
    case TaskKind::safety: run_safety(model, task, groups, clients, seed, report); break;
    case TaskKind::toxicity: run_toxicity(model, task, groups, clients, seed, report); break;
    }
    if (report.per_language.empty()) {
        throw InputError("no_eval_data", "task " + task.name + " has no evaluable items");
    }
    report.aggregate = mean_over_languages(report.per_language);
    return report;
}

std::string markdown_table(std::span<const EvalReport> reports, int decimals)
{
    if (reports.empty()) {
        throw InputError("empty_input", "no reports to tabulate");
    }
    std::set<std::string> languages;
    for (const auto& r : reports) {
        if (r.task != reports.front().task) {
            throw InputError("mixed_tasks", "one table per task: got " + r.task + " and " + reports.front().task);
        }
        for (const auto& [lang, v] : r.per_language) {
            languages.insert(lang);
        }
    }
    std::string out = "| Model |";
    std::string rule = "|---|";
    for (const auto& lang : languages) {
        out += " " + lang + " |";
        rule += "---|";
    }
    out += " Avg |\n" + rule + "---|\n";
    for (const auto& r : reports) {
        out += "| " + r.model_id + " |";
        for (const auto& lang : languages) {
            const auto it = r.per_language.find(lang);
            out += " " + (it == r.per_language.end() ? std::string("-") : format_fixed(it->second, decimals)) + " |";
        }
        out += " " + format_fixed(r.aggregate, decimals) + " |\n";
    }
    return out;
}

} // namespace aya::evaluation

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aya::evaluation {

// Last number in `text`: optional sign, digits with optional thousands
// separators (','), optional decimal part. Returns nullopt when none.
std::optional<double> strict_match(std::string_view text);

// Whitespace tokenization used by the metrics when no tokenizer is supplied.
std::vector<std::string> whitespace_tokens(std::string_view text);

enum class BleuSmoothing { none, exp };

struct BleuOptions {
    int max_n = 4;
    BleuSmoothing smoothing = BleuSmoothing::exp;
    // Drop n-gram orders the hypothesis is too short to have (sentence level).
    bool effective_order = true;
};

struct BleuStats {
    std::vector<std::uint64_t> matches; // clipped n-gram matches per order
    std::vector<std::uint64_t> totals;  // hypothesis n-grams per order
    std::uint64_t hyp_len = 0;
    std::uint64_t ref_len = 0;

    BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(std::span<const std::string> hypothesis, std::span<const std::string> reference, int max_n = 4);

// BLEU in [0, 100] from accumulated statistics:
//   100 * BP * exp(mean_n log p_n),  BP = min(1, exp(1 - ref_len / hyp_len))
// With exp smoothing the k-th order with zero matches uses p_n = 1 / (2^k total_n).
double bleu_from_stats(const BleuStats& stats, const BleuOptions& options = {});

double bleu(std::span<const std::string> hypothesis, std::span<const std::string> reference,
            const BleuOptions& options = {});
double bleu(std::string_view hypothesis, std::string_view reference, const BleuOptions& options = {});
// Corpus BLEU: statistics summed over all pairs before the formula.
double corpus_bleu(std::span<const std::vector<std::string>> hypotheses,
                   std::span<const std::vector<std::string>> references, const BleuOptions& options = {});

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// ROUGE-L F1 in [0, 1] from the longest common subsequence.
double rouge_l(std::span<const std::string> hypothesis, std::span<const std::string> reference);
double rouge_l(std::string_view hypothesis, std::string_view reference);

enum class Verdict { a, b, tie };
const char* to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct WinRate {
    double win_a = 0.0;
    double win_b = 0.0;
    double tie = 0.0;
};

// Percentages with ties kept in the denominator.
WinRate win_rate(std::span<const Verdict> outcomes);

// Arithmetic mean of per-language scores.
double mean_over_languages(std::span<const double> scores);
double mean_over_languages(const std::map<std::string, double>& scores);

// Mean over prompts of the maximum of its k scores. Each row must have exactly
// k scores in [0, 1].
double expected_max_toxicity(std::span<const std::vector<double>> scores, std::size_t k);
// Fraction of prompts whose maximum score is at least `threshold`.
double toxicity_probability(std::span<const std::vector<double>> scores, std::size_t k, double threshold = 0.5);

// Percentage of flagged responses.
double harmful_rate(std::span<const bool> flags);

} // namespace aya::evaluation

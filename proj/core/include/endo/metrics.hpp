#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace endo {

using Words = std::vector<std::string>;

// Lowercase ASCII, split on whitespace.
Words normalize_words(std::string_view text);

struct BleuStats {
    std::array<std::uint64_t, 4> matched{};  // clipped n-gram matches
    std::array<std::uint64_t, 4> total{};    // candidate n-grams
    std::uint64_t cand_len = 0;
    std::uint64_t ref_len = 0;
};

BleuStats bleu_stats(std::span<const Words> candidates, std::span<const Words> references);

// Corpus BLEU-k with uniform weights and brevity penalty min(1, e^(1 - r/c)).
double bleu(std::span<const Words> candidates, std::span<const Words> references, int k);
double bleu_from_stats(const BleuStats& s, int k);

struct MeteorDetail {
    double score = 0;
    int matches = 0;
    int chunks = 0;
    double precision = 0, recall = 0, fmean = 0;
};

// Exact-match unigram alignment maximizing matches, then minimizing chunks.
MeteorDetail meteor_detail(const Words& candidate, const Words& reference);
double meteor(const Words& candidate, const Words& reference);

struct RougeL {
    double precision = 0, recall = 0, f1 = 0;
    std::size_t lcs = 0;
};

std::size_t lcs_length(const Words& a, const Words& b);
RougeL rouge_l(const Words& candidate, const Words& reference);

struct MetricReport {
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
    double meteor = 0;
    double rouge = 0;
    std::size_t pairs = 0;
    BleuStats counts;

    double bleu_k(int k) const;
};

struct TextPair {
    std::string id;
    std::string generated;
    std::string reference;
};

// Corpus BLEU; METEOR and ROUGE-L F1 averaged over pairs.
MetricReport evaluate_corpus(std::span<const TextPair> pairs);

// (a - b) / b
double relative_change(double a, double b);

// Metric names in report order, and value lookup by name.
const std::vector<std::string>& metric_names();
double metric_value(const MetricReport& r, std::string_view name);

std::string metric_csv(const MetricReport& r);
std::string metric_table(const MetricReport& r);
// Rows: metric, a, b, relative change (a - b) / b.
std::string ablation_csv(const MetricReport& a, const MetricReport& b);
std::string ablation_table(const MetricReport& a, const MetricReport& b, std::string_view label_a,
                           std::string_view label_b);

}  // namespace endo

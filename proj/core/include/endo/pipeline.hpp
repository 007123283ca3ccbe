#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endo/generation.hpp"
#include "endo/metrics.hpp"
#include "endo/model.hpp"
#include "endo/storage.hpp"
#include "endo/tokenizer.hpp"
#include "endo/training.hpp"

namespace endo {

// Byte-level BPE trained on the texts of `records` plus the domain lexicon
// (finding and site words) when `lexicon` is set.
Tokenizer build_tokenizer(std::span<const ManifestRecord> records, std::size_t vocab_size, bool lexicon);

// Preprocesses every referenced image once (relative paths resolve against
// base_dir) and tokenizes each record's text. Records outside `split` are
// skipped when a split is given.
template <typename T>
Dataset<T> load_dataset(std::span<const ManifestRecord> records, const std::filesystem::path& base_dir,
                        const Tokenizer& tokenizer, const EncoderConfig& enc, std::optional<Split> split = {});

struct GeneratedReport {
    std::string id;
    std::string generated;
    std::string reference;
    GenerationResult result;
};

// Greedy generation for every item; `threads` > 1 splits items across
// workers, output order stays the item order.
template <typename T>
std::vector<GeneratedReport> generate_reports(const Model<T>& model, const Dataset<T>& data, const Tokenizer& tokenizer,
                                              int stage, int max_len, bool want_maps, int threads = 1);

// JSONL with one {"id", "generated", "reference", "stop"} object per line.
std::string reports_jsonl(std::span<const GeneratedReport> reports);
std::vector<TextPair> read_pairs(const std::filesystem::path& path);

std::string curve_csv(std::span<const CurvePoint> curve);

}  // namespace endo

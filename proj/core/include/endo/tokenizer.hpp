#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace endo {

using TokenSequence = std::vector<int>;

// Splits text into pre-tokenization chunks (GPT-2 style, ASCII classes with
// every byte >= 0x80 treated as a letter). Merges never cross chunk borders.
// Concatenating the chunks gives back the input exactly.
std::vector<std::string_view> pretokenize(std::string_view text);

// Byte-level BPE. Id layout: [0, 256) single bytes, then BOS, EOS, PAD, then
// learned merges in rank order, then domain-lexicon entries.
class Tokenizer {
public:
    static constexpr int kBos = 256;
    static constexpr int kEos = 257;
    static constexpr int kPad = 258;
    static constexpr int kFirstMerge = 259;
    static constexpr std::string_view kBosText = "<|bos|>";
    static constexpr std::string_view kEosText = "<|eos|>";
    static constexpr std::string_view kPadText = "<|pad|>";

    // Byte-only tokenizer (no merges).
    Tokenizer();

    // Learns merges until vocab_size is reached or no pair occurs twice.
    // Ties on frequency go to the lexicographically smaller (left, right) pair.
    static Tokenizer train(std::span<const std::string> corpus, std::size_t vocab_size);

    TokenSequence encode(std::string_view text, bool wrap = false) const;
    // Special tokens are dropped from the output. Unknown ids throw.
    std::string decode(std::span<const int> ids) const;

    // Returns a copy in which every term is an atomic token, matched as a
    // whole pre-tokenization chunk (bare or with one leading space).
    Tokenizer with_lexicon(std::span<const std::string> terms) const;

    std::size_t vocab_size() const { return tokens_.size(); }
    int bos() const { return kBos; }
    int eos() const { return kEos; }
    int pad() const { return kPad; }
    bool is_special(int id) const { return id == kBos || id == kEos || id == kPad; }

    const std::string& token_bytes(int id) const;
    std::size_t merge_count() const { return merges_.size(); }
    const std::vector<std::pair<int, int>>& merges() const { return merges_; }
    std::size_t lexicon_size() const { return lexicon_ids_.size(); }

    std::string serialize() const;
    static Tokenizer parse(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Tokenizer load(const std::filesystem::path& path);

    // FNV-1a 64 over serialize(), as 16 lowercase hex digits.
    std::string content_hash() const;

    bool operator==(const Tokenizer& o) const { return tokens_ == o.tokens_ && merges_ == o.merges_; }

private:
    void add_merge(int left, int right);
    void encode_chunk(std::string_view chunk, TokenSequence& out) const;

    std::vector<std::string> tokens_;
    std::vector<std::pair<int, int>> merges_;
    std::unordered_map<std::uint64_t, int> merge_rank_;
    std::unordered_map<std::string, int> lexicon_;
    std::vector<int> lexicon_ids_;
};

// Escapes bytes outside printable ASCII (and space, backslash) as \xHH.
std::string escape_bytes(std::string_view s);
std::string unescape_bytes(std::string_view s);

// A small general-English text with no endoscopy vocabulary; training on it
// gives a "generic" vocabulary that fragments domain words.
std::span<const std::string> generic_corpus();

}  // namespace endo

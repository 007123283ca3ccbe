#include "endo/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace endo {

namespace {

enum class CharClass { letter, digit, space, other };

CharClass classify(unsigned char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) return CharClass::letter;
    if (c >= '0' && c <= '9') return CharClass::digit;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return CharClass::space;
    return CharClass::other;
}

std::uint64_t pair_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::vector<std::string_view> pretokenize(std::string_view s) {
    std::vector<std::string_view> out;
    const std::size_t n = s.size();
    std::size_t i = 0;
    auto cls = [&](std::size_t k) { return classify(static_cast<unsigned char>(s[k])); };
    while (i < n) {
        std::size_t j = i;
        if (s[i] == ' ' && i + 1 < n && cls(i + 1) != CharClass::space) {
            const CharClass c = cls(i + 1);
            j = i + 1;
            while (j < n && cls(j) == c) ++j;
        } else if (cls(i) == CharClass::space) {
            while (j < n && cls(j) == CharClass::space) ++j;
            // Leave a trailing space to prefix the following word.
            if (j < n && j - i > 1 && s[j - 1] == ' ') --j;
        } else {
            const CharClass c = cls(i);
            while (j < n && cls(j) == c) ++j;
        }
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string escape_bytes(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (c > 0x20 && c < 0x7f && c != '\\') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[5];
            std::snprintf(buf, sizeof buf, "\\x%02x", c);
            out += buf;
        }
    }
    return out;
}

std::string unescape_bytes(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (i + 3 >= s.size() || s[i + 1] != 'x') throw std::invalid_argument("bad escape in token text");
        unsigned value = 0;
        auto [p, ec] = std::from_chars(s.data() + i + 2, s.data() + i + 4, value, 16);
        if (ec != std::errc{} || p != s.data() + i + 4) throw std::invalid_argument("bad escape in token text");
        out.push_back(static_cast<char>(value));
        i += 3;
    }
    return out;
}

Tokenizer::Tokenizer() {
    tokens_.reserve(kFirstMerge);
    for (int b = 0; b < 256; ++b) tokens_.emplace_back(1, static_cast<char>(b));
    tokens_.emplace_back(kBosText);
    tokens_.emplace_back(kEosText);
    tokens_.emplace_back(kPadText);
}

void Tokenizer::add_merge(int left, int right) {
    merge_rank_[pair_key(left, right)] = static_cast<int>(merges_.size());
    merges_.emplace_back(left, right);
    tokens_.push_back(tokens_[left] + tokens_[right]);
}

Tokenizer Tokenizer::train(std::span<const std::string> corpus, std::size_t vocab_size) {
    if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
    if (vocab_size <= static_cast<std::size_t>(kFirstMerge)) {
        throw std::invalid_argument("train_bpe: vocab_size must exceed 256 bytes + 3 special tokens");
    }
    std::map<std::string, long> chunk_counts;
    for (const auto& text : corpus)
        for (auto chunk : pretokenize(text)) ++chunk_counts[std::string(chunk)];

    std::vector<std::vector<int>> words;
    std::vector<long> counts;
    for (const auto& [chunk, count] : chunk_counts) {
        std::vector<int> syms;
        for (unsigned char c : chunk) syms.push_back(c);
        words.push_back(std::move(syms));
        counts.push_back(count);
    }

    Tokenizer tok;
    while (tok.tokens_.size() < vocab_size) {
        std::unordered_map<std::uint64_t, long> pair_counts;
        for (std::size_t w = 0; w < words.size(); ++w) {
            const auto& syms = words[w];
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) pair_counts[pair_key(syms[i], syms[i + 1])] += counts[w];
        }
        std::uint64_t best = 0;
        long best_count = 1;
        bool found = false;
        for (const auto& [key, count] : pair_counts) {
            if (count < 2) continue;
            const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
            bool better = count > best_count;
            if (found && count == best_count) {
                const int ba = static_cast<int>(best >> 32), bb = static_cast<int>(best & 0xffffffffu);
                better = std::tie(tok.tokens_[a], tok.tokens_[b]) < std::tie(tok.tokens_[ba], tok.tokens_[bb]);
            }
            if (!found || better) {
                best = key;
                best_count = count;
                found = true;
            }
        }
        if (!found) break;
        const int a = static_cast<int>(best >> 32), b = static_cast<int>(best & 0xffffffffu);
        const int merged = static_cast<int>(tok.tokens_.size());
        tok.add_merge(a, b);
        for (auto& syms : words) {
            std::vector<int> next;
            next.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size(); ++i) {
                if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(syms[i]);
                }
            }
            syms = std::move(next);
        }
    }
    return tok;
}

void Tokenizer::encode_chunk(std::string_view chunk, TokenSequence& out) const {
    if (!lexicon_.empty()) {
        auto it = lexicon_.find(std::string(chunk));
        if (it != lexicon_.end()) {
            out.push_back(it->second);
            return;
        }
    }
    std::vector<int> syms;
    syms.reserve(chunk.size());
    for (unsigned char c : chunk) syms.push_back(c);
    while (syms.size() > 1) {
        int best_rank = -1;
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = merge_rank_.find(pair_key(syms[i], syms[i + 1]));
            if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
        }
        if (best_rank < 0) break;
        const auto [a, b] = merges_[static_cast<std::size_t>(best_rank)];
        const int merged = kFirstMerge + best_rank;
        std::vector<int> next;
        next.reserve(syms.size());
        for (std::size_t i = 0; i < syms.size(); ++i) {
            if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
                next.push_back(merged);
                ++i;
            } else {
                next.push_back(syms[i]);
            }
        }
        syms = std::move(next);
    }
    out.insert(out.end(), syms.begin(), syms.end());
}

TokenSequence Tokenizer::encode(std::string_view text, bool wrap) const {
    TokenSequence out;
    if (wrap) out.push_back(kBos);
    for (auto chunk : pretokenize(text)) encode_chunk(chunk, out);
    if (wrap) out.push_back(kEos);
    return out;
}

const std::string& Tokenizer::token_bytes(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw std::out_of_range("unknown token id " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        const std::string& bytes = token_bytes(id);
        if (!is_special(id)) out += bytes;
    }
    return out;
}

Tokenizer Tokenizer::with_lexicon(std::span<const std::string> terms) const {
    Tokenizer out = *this;
    for (const auto& term : terms) {
        if (term.empty()) throw std::invalid_argument("domain lexicon: empty term");
        if (term == kBosText || term == kEosText || term == kPadText) {
            throw std::invalid_argument("domain lexicon: term '" + term + "' collides with a special token");
        }
        const auto chunks = pretokenize(term);
        if (chunks.size() != 1 || term.front() == ' ') {
            throw std::invalid_argument("domain lexicon: term '" + term + "' is not a single word");
        }
        for (const std::string& form : {term, " " + term}) {
            if (out.lexicon_.count(form)) continue;
            const int id = static_cast<int>(out.tokens_.size());
            out.tokens_.push_back(form);
            out.lexicon_.emplace(form, id);
            out.lexicon_ids_.push_back(id);
        }
    }
    return out;
}

std::string Tokenizer::serialize() const {
    std::ostringstream os;
    os << "endotok 1 vocab_size=" << tokens_.size() << " bos=" << kBos << " eos=" << kEos << " pad=" << kPad
       << " merges=" << merges_.size() << " lexicon=" << lexicon_ids_.size() << "\n";
    for (const auto& [a, b] : merges_) {
        os << a << ' ' << b << ' ' << escape_bytes(tokens_[a]) << ' ' << escape_bytes(tokens_[b]) << "\n";
    }
    for (int id : lexicon_ids_) os << "lexicon " << id << ' ' << escape_bytes(tokens_[id]) << "\n";
    return os.str();
}

namespace {

std::size_t header_field(const std::string& header, const std::string& key) {
    const auto pos = header.find(" " + key + "=");
    if (pos == std::string::npos) throw std::invalid_argument("tokenizer header missing '" + key + "'");
    return std::stoul(header.substr(pos + key.size() + 2));
}

}  // namespace

Tokenizer Tokenizer::parse(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string header;
    if (!std::getline(is, header) || header.rfind("endotok 1 ", 0) != 0) {
        throw std::invalid_argument("not an endotok v1 tokenizer file");
    }
    const std::size_t vocab = header_field(header, "vocab_size");
    const std::size_t n_merges = header_field(header, "merges");
    const std::size_t n_lex = header_field(header, "lexicon");
    if (header_field(header, "bos") != kBos || header_field(header, "eos") != kEos ||
        header_field(header, "pad") != kPad) {
        throw std::invalid_argument("tokenizer special ids do not match this build");
    }
    Tokenizer tok;
    std::string line;
    for (std::size_t r = 0; r < n_merges; ++r) {
        if (!std::getline(is, line)) throw std::invalid_argument("tokenizer file truncated in merges");
        std::istringstream ls(line);
        int a = -1, b = -1;
        std::string sa, sb;
        ls >> a >> b >> sa >> sb;
        const auto n = static_cast<int>(tok.tokens_.size());
        if (!ls || a < 0 || b < 0 || a >= n || b >= n || tok.is_special(a) || tok.is_special(b)) {
            throw std::invalid_argument("bad merge line " + std::to_string(r + 2));
        }
        if (unescape_bytes(sa) != tok.tokens_[a] || unescape_bytes(sb) != tok.tokens_[b]) {
            throw std::invalid_argument("merge line " + std::to_string(r + 2) + " text does not match its ids");
        }
        tok.add_merge(a, b);
    }
    for (std::size_t r = 0; r < n_lex; ++r) {
        if (!std::getline(is, line)) throw std::invalid_argument("tokenizer file truncated in lexicon");
        std::istringstream ls(line);
        std::string tag, form;
        int id = -1;
        ls >> tag >> id >> form;
        if (!ls || tag != "lexicon" || id != static_cast<int>(tok.tokens_.size())) {
            throw std::invalid_argument("bad lexicon line");
        }
        const std::string bytes = unescape_bytes(form);
        tok.tokens_.push_back(bytes);
        tok.lexicon_.emplace(bytes, id);
        tok.lexicon_ids_.push_back(id);
    }
    if (tok.tokens_.size() != vocab) throw std::invalid_argument("tokenizer vocab_size does not match contents");
    return tok;
}

void Tokenizer::save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write tokenizer file " + path.string());
    f << serialize();
    if (!f) throw std::runtime_error("failed writing tokenizer file " + path.string());
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read tokenizer file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string Tokenizer::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace endo

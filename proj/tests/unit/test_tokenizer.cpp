#include <gtest/gtest.h>

#include <filesystem>

#include "endo/rng.hpp"
#include "endo/synthetic.hpp"
#include "endo/tokenizer.hpp"

using namespace endo;

namespace {

// Random valid UTF-8: ASCII, 2-, 3- and 4-byte scalars (no surrogates).
std::string random_utf8(Rng& rng, int max_chars) {
    std::string s;
    const int n = rng.range(0, max_chars);
    for (int i = 0; i < n; ++i) {
        std::uint32_t cp;
        switch (rng.range(0, 3)) {
            case 0: cp = static_cast<std::uint32_t>(rng.range(0x20, 0x7e)); break;
            case 1: cp = static_cast<std::uint32_t>(rng.range(0x80, 0x7ff)); break;
            case 2: cp = static_cast<std::uint32_t>(rng.range(0x800, 0xd7ff)); break;
            default: cp = static_cast<std::uint32_t>(rng.range(0x10000, 0x10ffff)); break;
        }
        if (cp < 0x80) {
            s += static_cast<char>(cp);
        } else if (cp < 0x800) {
            s += static_cast<char>(0xc0 | (cp >> 6));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        } else if (cp < 0x10000) {
            s += static_cast<char>(0xe0 | (cp >> 12));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        } else {
            s += static_cast<char>(0xf0 | (cp >> 18));
            s += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            s += static_cast<char>(0x80 | (cp & 0x3f));
        }
    }
    return s;
}

std::vector<std::string> findings_texts() {
    CorpusConfig cfg;
    cfg.n_patients = 40;
    std::vector<std::string> out;
    for (const auto& p : plan_corpus(cfg)) out.push_back(p.findings_text);
    return out;
}

std::vector<std::string> pieces(const Tokenizer& t, std::string_view text) {
    std::vector<std::string> out;
    for (int id : t.encode(text)) out.push_back(t.token_bytes(id));
    return out;
}

}  // namespace

TEST(TokenizerTrain, FirstMergeOfRepeatedPair) {
    const std::vector<std::string> corpus{"aaaa"};
    const auto t = Tokenizer::train(corpus, 260);
    ASSERT_EQ(t.merge_count(), 1u);
    EXPECT_EQ(t.merges()[0], std::make_pair(int('a'), int('a')));
    EXPECT_EQ(t.token_bytes(Tokenizer::kFirstMerge), "aa");
}

TEST(TokenizerTrain, Deterministic) {
    const auto texts = findings_texts();
    EXPECT_EQ(Tokenizer::train(texts, 400), Tokenizer::train(texts, 400));
    EXPECT_EQ(Tokenizer::train(texts, 400).content_hash(), Tokenizer::train(texts, 400).content_hash());
}

TEST(TokenizerTrain, CompressesTrainingText) {
    const auto texts = findings_texts();
    const auto t = Tokenizer::train(texts, 512);
    for (const auto& s : texts) EXPECT_LT(t.encode(s).size(), s.size());
}

TEST(TokenizerEncode, EmptyWrapped) {
    const Tokenizer t;
    EXPECT_EQ(t.encode("", true), (TokenSequence{Tokenizer::kBos, Tokenizer::kEos}));
    const TokenSequence specials{Tokenizer::kBos, Tokenizer::kEos};
    EXPECT_EQ(t.decode(specials), "");
}

TEST(TokenizerEncode, RoundTripRandomUtf8) {
    const auto t = Tokenizer::train(findings_texts(), 512).with_lexicon(domain_terms());
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto s = random_utf8(rng, 24);
        ASSERT_EQ(t.decode(t.encode(s)), s);
    }
}

TEST(TokenizerEncode, CaptionRoundTrip) {
    const auto t = Tokenizer::train(findings_texts(), 512);
    EXPECT_EQ(t.decode(t.encode("polyp rectum")), "polyp rectum");
}

TEST(TokenizerDecode, UnknownIdThrows) {
    const Tokenizer t;
    const TokenSequence bad{100000};
    EXPECT_THROW(t.decode(bad), std::exception);
}

TEST(TokenizerLexicon, GenericVocabularySplitsPolyp) {
    const auto generic = Tokenizer::train(generic_corpus(), 400);
    EXPECT_EQ(pieces(generic, "polyp"), (std::vector<std::string>{"poly", "p"}));
}

TEST(TokenizerLexicon, LexiconMakesPolypAtomic) {
    const auto generic = Tokenizer::train(generic_corpus(), 400);
    const std::vector<std::string> terms{"polyp"};
    const auto lex = generic.with_lexicon(terms);
    EXPECT_EQ(lex.encode("polyp").size(), 1u);
    EXPECT_EQ(lex.encode(" polyp").size(), 1u);
    EXPECT_EQ(lex.decode(lex.encode("polypectomy")), "polypectomy");
}

TEST(TokenizerLexicon, AbsentTermLeavesEncodingUnchanged) {
    const auto generic = Tokenizer::train(generic_corpus(), 400);
    const std::vector<std::string> terms{"duodenum"};
    const auto lex = generic.with_lexicon(terms);
    const std::string text = "the quick brown fox jumps over the lazy dog";
    EXPECT_EQ(lex.encode(text), generic.encode(text));
}

TEST(TokenizerFile, SaveLoadRoundTrip) {
    const auto t = Tokenizer::train(findings_texts(), 450).with_lexicon(domain_terms());
    const auto path = std::filesystem::temp_directory_path() / "endo_tok_test.json";
    t.save(path);
    const auto u = Tokenizer::load(path);
    EXPECT_EQ(t, u);
    EXPECT_EQ(t.content_hash(), u.content_hash());
    EXPECT_EQ(u.lexicon_size(), t.lexicon_size());
    std::filesystem::remove(path);
}

TEST(TokenizerFile, HashChangesWithMerges) {
    const auto texts = findings_texts();
    const auto a = Tokenizer::train(texts, 270), b = Tokenizer::train(texts, 271);
    ASSERT_EQ(b.vocab_size(), a.vocab_size() + 1);
    EXPECT_NE(a.content_hash(), b.content_hash());
}

TEST(Pretokenize, ChunksConcatenateToInput) {
    const std::string text = "A small polyp was found in the rectum.  Done!\n";
    std::string joined;
    for (auto c : pretokenize(text)) joined += c;
    EXPECT_EQ(joined, text);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "endo/metrics.hpp"
#include "endo/rng.hpp"
#include "endo/verify.hpp"

using namespace endo;

namespace {

Words w(std::string_view s) { return normalize_words(s); }

Words random_words(Rng& rng, std::size_t max_len) {
    static const char* lex[] = {"a", "small", "polyp", "was", "found", "in", "the", "colon"};
    Words out(rng.below(max_len + 1));
    for (auto& x : out) x = lex[rng.below(8)];
    return out;
}

}  // namespace

TEST(Normalize, LowercasesAndSplits) {
    EXPECT_EQ(w("The  CAT\tsat\n"), (Words{"the", "cat", "sat"}));
    EXPECT_TRUE(w("   ").empty());
}

TEST(Bleu, IdenticalIsOne) {
    const std::vector<Words> c{w("a small polyp was found")};
    for (int k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(bleu(c, c, k), 1.0);
}

TEST(Bleu, BrevityPenalty) {
    const std::vector<Words> c{w("the cat")}, r{w("the cat sat on the mat")};
    EXPECT_NEAR(bleu(c, r, 1), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(bleu(c, r, 2), std::exp(-2.0), 1e-15);
}

TEST(Bleu, ClippedCounts) {
    const std::vector<Words> c{w("the the the the")}, r{w("the cat")};
    EXPECT_DOUBLE_EQ(bleu(c, r, 1), 0.25);
    const auto s = bleu_stats(c, r);
    EXPECT_EQ(s.matched[0], 1u);
    EXPECT_EQ(s.total[0], 4u);
    EXPECT_EQ(s.cand_len, 4u);
    EXPECT_EQ(s.ref_len, 2u);
}

TEST(Bleu, NoHigherOrderMatchIsZero) {
    const std::vector<Words> c{w("polyp colon")}, r{w("colon polyp")};
    EXPECT_EQ(bleu(c, r, 2), 0.0);
    EXPECT_EQ(bleu(c, r, 1), 1.0);
}

TEST(Meteor, WorkedExamples) {
    EXPECT_NEAR(meteor(w("a b c"), w("a b c")), 1.0 - 0.5 / 27, 1e-15);
    EXPECT_NEAR(meteor(w("a b c"), w("c b a")), 0.5, 1e-15);
    EXPECT_EQ(meteor(w("x y"), w("a b")), 0.0);
    EXPECT_EQ(meteor(Words{}, w("a")), 0.0);
    const auto d = meteor_detail(w("a b x c"), w("a b c"));
    EXPECT_EQ(d.matches, 3);
    EXPECT_EQ(d.chunks, 2);
}

TEST(Meteor, PrefersFewerChunks) {
    // "a" could align to either reference "a"; the contiguous choice wins.
    const auto d = meteor_detail(w("a b"), w("a x a b"));
    EXPECT_EQ(d.matches, 2);
    EXPECT_EQ(d.chunks, 1);
}

TEST(Rouge, LcsAndF1) {
    EXPECT_EQ(lcs_length(w("a b c d"), w("a c d e")), 3u);
    const auto r = rouge_l(w("a b c d"), w("a c d e"));
    EXPECT_DOUBLE_EQ(r.f1, 0.75);
    EXPECT_DOUBLE_EQ(rouge_l(w("a"), w("b")).f1, 0.0);
    EXPECT_DOUBLE_EQ(rouge_l(Words{}, Words{}).f1, 0.0);
    const auto p = rouge_l(w("a b"), w("a b c d"));
    EXPECT_DOUBLE_EQ(p.precision, 1.0);
    EXPECT_DOUBLE_EQ(p.recall, 0.5);
}

TEST(Oracles, AgreeOnRandomPairs) {
    Rng rng(11);
    std::vector<Words> cs, rs;
    for (int i = 0; i < 200; ++i) {
        auto c = random_words(rng, 8), r = random_words(rng, 8);
        EXPECT_EQ(lcs_length(c, r), oracle::lcs(c, r));
        EXPECT_NEAR(rouge_l(c, r).f1, oracle::rouge_l_f1(c, r), 1e-12);
        EXPECT_NEAR(meteor(c, r), oracle::meteor(c, r), 1e-12);
        cs.push_back(std::move(c));
        rs.push_back(std::move(r));
    }
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(bleu(cs, rs, k), oracle::bleu(cs, rs, k), 1e-12);
}

TEST(Rouge, MoreOverlapNeverScoresLower) {
    const auto ref = w("a small polyp was found in the colon");
    const Words cands[] = {w("the"), w("the colon"), w("polyp the colon"), w("a polyp found the colon"),
                           w("a small polyp was found in the colon")};
    double prev = -1;
    for (const auto& c : cands) {
        const double f = rouge_l(c, ref).f1;
        EXPECT_GT(f, prev);
        prev = f;
    }
}

TEST(Corpus, PairOrderDoesNotMatter) {
    std::vector<TextPair> pairs{{"1", "a small polyp", "a small polyp was found"},
                                {"2", "the colon was normal", "the cecum was normal"},
                                {"3", "an ulcer", "a large ulcer was found in the rectum"}};
    const auto a = evaluate_corpus(pairs);
    std::reverse(pairs.begin(), pairs.end());
    const auto b = evaluate_corpus(pairs);
    for (const auto& n : metric_names()) EXPECT_NEAR(metric_value(a, n), metric_value(b, n), 1e-15) << n;
    EXPECT_EQ(a.pairs, 3u);
}

TEST(Corpus, IdenticalPairsScoreOne) {
    const std::vector<TextPair> pairs{{"1", "The colon was normal.", "the colon was normal."}};
    const auto r = evaluate_corpus(pairs);
    EXPECT_DOUBLE_EQ(r.bleu1, 1.0);
    EXPECT_DOUBLE_EQ(r.rouge, 1.0);
    EXPECT_NEAR(r.meteor, 1.0 - 0.5 / 64, 1e-15);
}

TEST(Report, RelativeChange) {
    EXPECT_DOUBLE_EQ(relative_change(0.33, 0.30), (0.33 - 0.30) / 0.30);
    EXPECT_NEAR(relative_change(1.1, 1.0), 0.1, 1e-15);
    EXPECT_THROW(relative_change(1.0, 0.0), std::domain_error);
}

TEST(Report, CsvAndTableLayout) {
    MetricReport r;
    r.bleu1 = 0.5;
    r.rouge = 0.25;
    r.pairs = 7;
    EXPECT_EQ(metric_csv(r),
              "metric,value\nbleu1,0.5000000000\nbleu2,0.0000000000\nbleu3,0.0000000000\nbleu4,0.0000000000\n"
              "meteor,0.0000000000\nrouge_l,0.2500000000\npairs,7\n");
    EXPECT_NE(metric_table(r).find("rouge_l     0.2500"), std::string::npos);
    MetricReport b = r;
    b.rouge = 0.2;
    b.bleu1 = 0.4;
    b.bleu2 = b.bleu3 = b.bleu4 = b.meteor = 0.1;
    r.bleu2 = r.bleu3 = r.bleu4 = r.meteor = 0.1;
    const auto csv = ablation_csv(r, b);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,a,b,relative_change");
    EXPECT_NE(csv.find("rouge_l,0.2500000000,0.2000000000,0.2500000000"), std::string::npos);
    EXPECT_NE(ablation_table(r, b, "pretrained", "fresh").find("pretrained"), std::string::npos);
}

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "endo/synthetic.hpp"
#include "endo/tokenizer.hpp"

namespace {

std::vector<std::string> findings_corpus(int n_patients) {
    endo::CorpusConfig cfg;
    cfg.n_patients = n_patients;
    std::vector<std::string> texts;
    for (const auto& p : endo::plan_corpus(cfg)) texts.push_back(p.findings_text);
    return texts;
}

void BM_TrainBpe(benchmark::State& state) {
    const auto texts = findings_corpus(200);
    for (auto _ : state) benchmark::DoNotOptimize(endo::Tokenizer::train(texts, std::size_t(state.range(0))));
}
BENCHMARK(BM_TrainBpe)->Arg(300)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
    const auto texts = findings_corpus(200);
    auto tok = endo::Tokenizer::train(texts, 512);
    if (state.range(0) != 0) tok = tok.with_lexicon(endo::domain_terms());
    std::int64_t bytes = 0;
    for (const auto& t : texts) bytes += std::int64_t(t.size());
    for (auto _ : state)
        for (const auto& t : texts) benchmark::DoNotOptimize(tok.encode(t, true));
    state.SetBytesProcessed(state.iterations() * bytes);
}
BENCHMARK(BM_Encode)->ArgName("lexicon")->Arg(0)->Arg(1);

void BM_Decode(benchmark::State& state) {
    const auto texts = findings_corpus(200);
    const auto tok = endo::Tokenizer::train(texts, 512);
    std::vector<endo::TokenSequence> encoded;
    for (const auto& t : texts) encoded.push_back(tok.encode(t, true));
    for (auto _ : state)
        for (const auto& ids : encoded) benchmark::DoNotOptimize(tok.decode(ids));
}
BENCHMARK(BM_Decode);

}  // namespace

BENCHMARK_MAIN();

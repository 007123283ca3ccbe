#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "endo/metrics.hpp"
#include "endo/rng.hpp"
#include "endo/synthetic.hpp"

namespace {

// Generated/reference pairs from the synthetic planner, with the generated
// side shifted by one procedure so the texts overlap only partly.
std::vector<endo::TextPair> corpus_pairs(int n_patients) {
    endo::CorpusConfig cfg;
    cfg.n_patients = n_patients;
    const auto plan = endo::plan_corpus(cfg);
    std::vector<endo::TextPair> pairs;
    for (std::size_t i = 0; i + 1 < plan.size(); ++i)
        pairs.push_back({plan[i].procedure_id, plan[i + 1].findings_text, plan[i].findings_text});
    return pairs;
}

void BM_EvaluateCorpus(benchmark::State& state) {
    const auto pairs = corpus_pairs(int(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(endo::evaluate_corpus(pairs));
    state.SetItemsProcessed(state.iterations() * std::int64_t(pairs.size()));
}
BENCHMARK(BM_EvaluateCorpus)->Arg(60)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_Meteor(benchmark::State& state) {
    // Repetitive findings are the expensive case for the alignment search.
    std::string cand, ref;
    for (int i = 0; i < state.range(0); ++i) {
        cand += "The colon was normal. ";
        ref += (i % 2 ? "The colon was normal. " : "A small polyp was found in the colon. ");
    }
    const auto c = endo::normalize_words(cand);
    const auto r = endo::normalize_words(ref);
    for (auto _ : state) benchmark::DoNotOptimize(endo::meteor(c, r));
}
BENCHMARK(BM_Meteor)->Arg(2)->Arg(6)->Arg(12);

void BM_RougeL(benchmark::State& state) {
    endo::Rng rng(5);
    endo::Words a, b;
    for (int i = 0; i < state.range(0); ++i) {
        a.push_back(std::to_string(rng.range(0, 20)));
        b.push_back(std::to_string(rng.range(0, 20)));
    }
    for (auto _ : state) benchmark::DoNotOptimize(endo::rouge_l(a, b));
}
BENCHMARK(BM_RougeL)->Arg(16)->Arg(128);

}  // namespace

BENCHMARK_MAIN();

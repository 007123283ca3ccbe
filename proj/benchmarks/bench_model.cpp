#include <benchmark/benchmark.h>

#include <vector>

#include "endo/generation.hpp"
#include "endo/model.hpp"
#include "endo/rng.hpp"
#include "endo/training.hpp"

namespace {

constexpr int kVocab = 361;

template <typename T>
endo::ImageTensor<T> random_image(endo::Rng& rng, int size) {
    endo::ImageTensor<T> im{endo::Tensor<T>({std::size_t(size), std::size_t(size), 3})};
    for (auto& v : im.pixels.span()) v = T(rng.normal());
    return im;
}

// One procedure of `n_images` images with a 48-token findings text.
template <typename T>
endo::Dataset<T> procedure(int n_images, std::uint64_t seed) {
    endo::Rng rng(seed);
    endo::Dataset<T> data;
    typename endo::Dataset<T>::Item item;
    item.id = "bench";
    for (int i = 0; i < n_images; ++i) {
        data.images.push_back(random_image<T>(rng, 64));
        item.images.push_back(std::size_t(i));
    }
    for (int i = 0; i < 48; ++i) item.text.push_back(rng.range(0, 255));
    data.items.push_back(item);
    return data;
}

template <typename T>
void BM_FindingsLoss(benchmark::State& state) {
    const auto model = endo::Model<T>::create(endo::ModelConfig::desk(kVocab), 1);
    const auto data = procedure<T>(int(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(endo::evaluate_loss(model, data, 2, 256));
}
BENCHMARK(BM_FindingsLoss<float>)->ArgName("images")->Arg(1)->Arg(4)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FindingsLoss<double>)->ArgName("images")->Arg(4)->Unit(benchmark::kMillisecond);

template <typename T>
void BM_GreedyGenerate(benchmark::State& state) {
    const auto cfg = endo::ModelConfig::desk(kVocab);
    auto model = endo::Model<T>::create(cfg, 3);
    // Keep EOS out of reach so every iteration decodes the full length.
    model.params.at("dec.head.b").value[std::size_t(endo::Tokenizer::kEos)] = T(-1e4);
    const auto data = procedure<T>(int(state.range(0)), 4);
    std::vector<const endo::ImageTensor<T>*> ptrs;
    for (const auto& im : data.images) ptrs.push_back(&im);
    const auto ctx = endo::findings_context(model, std::span<const endo::ImageTensor<T>* const>(ptrs));
    const int max_len = 64;
    for (auto _ : state) benchmark::DoNotOptimize(endo::greedy_generate(ctx, model.params, cfg.decoder, max_len));
    state.SetItemsProcessed(state.iterations() * max_len);
}
BENCHMARK(BM_GreedyGenerate<float>)->ArgName("images")->Arg(1)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

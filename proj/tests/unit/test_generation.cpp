#include <gtest/gtest.h>

#include <filesystem>

#include "endo/generation.hpp"
#include "endo/model.hpp"
#include "endo/rng.hpp"

using namespace endo;

namespace {

ModelConfig tiny() {
    auto cfg = ModelConfig::tiny(Tokenizer::kFirstMerge + 8);
    cfg.decoder.max_seq_len = 16;
    return cfg;
}

ImageTensor<double> random_image(Rng& rng, int size) {
    ImageTensor<double> im{Tensor<double>({std::size_t(size), std::size_t(size), 3})};
    for (auto& v : im.pixels.span()) v = rng.normal();
    return im;
}

// Zeroes the output projection so every step's logits equal dec.head.b.
void bias_only_head(Model<double>& m, int favored) {
    for (auto& v : m.params.at("dec.head.w").value.span()) v = 0;
    auto& b = m.params.at("dec.head.b").value;
    for (auto& v : b.span()) v = 0;
    b[std::size_t(favored)] = 10;
}

// Context with n valid images of `patches` rows each inside a 12-slot layout.
FusedContext<double> layout(int n, int patches, int d = 4) {
    FusedContext<double> ctx;
    ctx.patches_per_image = patches;
    ctx.n_images = n;
    ctx.memory = Tensor<double>({std::size_t(kMaxImages * patches), std::size_t(d)});
    ctx.valid.assign(std::size_t(kMaxImages * patches), 0);
    for (int i = 0; i < n * patches; ++i) ctx.valid[std::size_t(i)] = 1;
    return ctx;
}

AttentionMap one_hot(int planes, int grid, int plane, int cell) {
    AttentionMap m;
    m.n_images = planes;
    m.weights = Tensor<double>({std::size_t(planes), std::size_t(grid), std::size_t(grid)});
    m.weights[std::size_t(plane * grid * grid + cell)] = 1;
    return m;
}

Raster grey(int size) {
    Raster r(size, size);
    for (auto& p : r.pixels) p = 100;
    return r;
}

}  // namespace

TEST(Greedy, ImmediateEosGivesEmptyText) {
    const auto cfg = tiny();
    auto m = Model<double>::create(cfg, 1);
    bias_only_head(m, Tokenizer::kEos);
    Rng rng(1);
    const auto ctx = caption_context(m, random_image(rng, 32));
    const Tokenizer tok;
    const auto res = greedy_generate(ctx, m.params, cfg.decoder, 10, &tok);
    EXPECT_TRUE(res.ids.empty());
    EXPECT_EQ(res.text, "");
    EXPECT_EQ(res.stop_reason, StopReason::eos);
}

TEST(Greedy, MaxLenStopsGeneration) {
    const auto cfg = tiny();
    auto m = Model<double>::create(cfg, 2);
    bias_only_head(m, 'a');
    Rng rng(2);
    const auto ctx = caption_context(m, random_image(rng, 32));
    const Tokenizer tok;
    const auto res = greedy_generate(ctx, m.params, cfg.decoder, 5, &tok);
    EXPECT_EQ(res.text, "aaaaa");
    EXPECT_EQ(res.stop_reason, StopReason::max_len);
    EXPECT_THROW(greedy_generate(ctx, m.params, cfg.decoder, cfg.decoder.max_seq_len + 1), std::invalid_argument);
    EXPECT_THROW(greedy_generate(ctx, m.params, cfg.decoder, 0), std::invalid_argument);
}

TEST(Greedy, NeverEmitsBosOrPad) {
    const auto cfg = tiny();
    auto m = Model<double>::create(cfg, 3);
    bias_only_head(m, Tokenizer::kBos);
    m.params.at("dec.head.b").value[std::size_t(Tokenizer::kPad)] = 10;
    m.params.at("dec.head.b").value[std::size_t('z')] = 1;
    Rng rng(3);
    const auto ctx = caption_context(m, random_image(rng, 32));
    const auto res = greedy_generate(ctx, m.params, cfg.decoder, 3);
    EXPECT_EQ(res.ids, (std::vector<int>{'z', 'z', 'z'}));
}

TEST(Greedy, DeterministicWithMaps) {
    const auto cfg = tiny();
    const auto m = Model<double>::create(cfg, 4);
    Rng rng(4);
    std::vector<ImageTensor<double>> imgs{random_image(rng, 32), random_image(rng, 32)};
    std::vector<const ImageTensor<double>*> p{&imgs[0], &imgs[1]};
    const auto ctx = findings_context(m, std::span<const ImageTensor<double>* const>(p));
    const auto a = greedy_generate(ctx, m.params, cfg.decoder, 8, nullptr, true);
    const auto b = greedy_generate(ctx, m.params, cfg.decoder, 8, nullptr, true);
    EXPECT_EQ(a.ids, b.ids);
    ASSERT_EQ(a.maps.size(), a.ids.size());
    for (std::size_t i = 0; i < a.maps.size(); ++i) {
        EXPECT_EQ(a.maps[i].weights, b.maps[i].weights);
        EXPECT_NEAR(a.maps[i].total(), 1.0, 1e-12);
        EXPECT_EQ(a.maps[i].token_id, a.ids[i]);
        // unused slots carry no mass
        for (std::size_t j = 2 * 4; j < a.maps[i].weights.size(); ++j) EXPECT_EQ(a.maps[i].weights[j], 0.0);
    }
}

TEST(AttentionMap, UniformWeightsGiveUniformMap) {
    const auto ctx = layout(1, 196);
    Tensor<double> probs({2, ctx.valid.size()}, 0.0);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t j = 0; j < 196; ++j) probs.at(h, j) = 1.0 / 196;
    const auto map = attention_map_from_heads(probs, ctx);
    EXPECT_EQ(map.grid(), 14);
    EXPECT_EQ(map.weights.dim(0), std::size_t(kMaxImages));
    for (std::size_t j = 0; j < 196; ++j) EXPECT_NEAR(map.weights[j], 1.0 / 196, 1e-15);
    EXPECT_NEAR(map.total(), 1.0, 1e-12);
}

TEST(AttentionMap, HeadsAveragedAndInvalidRowsDropped) {
    const auto ctx = layout(2, 4);
    Tensor<double> probs({2, ctx.valid.size()}, 0.0);
    probs.at(0, 1) = 1.0;
    probs.at(1, 5) = 0.5;
    probs.at(1, 20) = 0.5;  // slot 5 is unused
    const auto map = attention_map_from_heads(probs, ctx);
    EXPECT_NEAR(map.weights[1], 2.0 / 3, 1e-15);
    EXPECT_NEAR(map.weights[5], 1.0 / 3, 1e-15);
    EXPECT_EQ(map.weights[20], 0.0);
    EXPECT_EQ(map.n_images, 2);
}

TEST(AttentionMap, NoValidMassThrows) {
    const auto ctx = layout(1, 4);
    Tensor<double> probs({1, ctx.valid.size()}, 0.0);
    probs.at(0, 30) = 1.0;
    EXPECT_THROW(attention_map_from_heads(probs, ctx), std::domain_error);
}

TEST(BoxMass, CellFractions) {
    const auto map = one_hot(1, 4, 0, 5);  // row 1, col 1 of a 4x4 grid on 64 px
    EXPECT_DOUBLE_EQ(box_attention_mass(map, 0, {16, 16, 32, 32}, 64), 1.0);
    EXPECT_DOUBLE_EQ(box_attention_mass(map, 0, {16, 16, 24, 32}, 64), 0.5);
    EXPECT_DOUBLE_EQ(box_attention_mass(map, 0, {0, 0, 16, 16}, 64), 0.0);
    EXPECT_DOUBLE_EQ(box_attention_mass(map, 0, {}, 64), 0.0);
    EXPECT_THROW(box_attention_mass(map, 1, {0, 0, 4, 4}, 64), std::out_of_range);
    EXPECT_THROW(box_attention_mass(map, 0, {0, 0, 4, 4}, 30), std::invalid_argument);
}

TEST(Overlay, FlatOrZeroMapLeavesBase) {
    AttentionMap m;
    m.n_images = 1;
    m.weights = Tensor<double>({1, 2, 2});
    const auto base = grey(8);
    EXPECT_EQ(overlay_plane(m, 0, base, 0, 0), base);
}

TEST(Overlay, HotCellIsBrightest) {
    const auto m = one_hot(1, 2, 0, 3);
    const auto out = overlay_plane(m, 0, grey(8), 0, 1);
    auto brightness = [&](int x, int y) { return out.at(x, y, 0) + out.at(x, y, 1) + out.at(x, y, 2); };
    EXPECT_GT(brightness(6, 6), brightness(1, 1));
    EXPECT_GT(brightness(6, 6), brightness(6, 1));
    EXPECT_EQ(brightness(1, 1), brightness(1, 6));
}

TEST(Heatmap, FilesAndSidecarRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "endo_heatmap_test";
    std::filesystem::remove_all(dir);
    auto m = one_hot(kMaxImages, 2, 1, 2);
    m.n_images = 2;
    m.weights[0] = 1.0 / 3;
    m.token_index = 3;
    m.token_id = 300;
    m.token_string = " polyp/\n";
    const std::vector<Raster> bases{grey(8), grey(8)};
    const auto files = render_heatmap(m, bases, dir);
    EXPECT_EQ(files.image.filename(), "tok003__polyp__.png");
    const auto png = read_png(files.image);
    EXPECT_EQ(png.width, 16);
    EXPECT_EQ(png.height, 8);
    const auto back = read_heatmap_sidecar(files.sidecar);
    EXPECT_EQ(back.token_index, 3);
    EXPECT_EQ(back.token_id, 300);
    EXPECT_EQ(back.token_string, m.token_string);
    EXPECT_EQ(back.n_images, 2);
    ASSERT_EQ(back.weights.shape(), m.weights.shape());
    for (std::size_t i = 0; i < m.weights.size(); ++i) EXPECT_NEAR(back.weights[i], m.weights[i], 1e-6);
    std::filesystem::remove_all(dir);
}

TEST(Heatmap, NeedsOneBasePerImage) {
    auto m = one_hot(kMaxImages, 2, 0, 0);
    m.n_images = 2;
    const std::vector<Raster> bases{grey(8)};
    EXPECT_THROW(render_heatmap(m, bases, std::filesystem::temp_directory_path()), std::invalid_argument);
}

TEST(ToRaster, UndoesPreprocessing) {
    Raster r(32, 32);
    Rng rng(9);
    for (auto& p : r.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    EncoderConfig enc = tiny().encoder;
    EXPECT_EQ(to_raster(preprocess<double>(r, enc)), r);
}

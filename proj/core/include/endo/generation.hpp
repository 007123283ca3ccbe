#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "endo/fusion.hpp"
#include "endo/image.hpp"
#include "endo/text_decoder.hpp"
#include "endo/tokenizer.hpp"

namespace endo {

// Last-layer cross-attention for one token, averaged over heads and
// renormalized over valid context rows. weights is [planes, grid, grid] with
// one plane per image slot; planes of unused slots are zero.
struct AttentionMap {
    int token_index = 0;
    int token_id = -1;
    std::string token_string;
    int n_images = 0;
    Tensor<double> weights;

    int grid() const { return weights.rank() == 3 ? static_cast<int>(weights.dim(1)) : 0; }
    double total() const;
};

enum class StopReason { eos, max_len };
std::string_view stop_reason_name(StopReason r);

struct GenerationResult {
    std::vector<int> ids;  // generated tokens; no BOS, no EOS
    std::string text;
    std::vector<AttentionMap> maps;  // filled when requested, one per id
    StopReason stop_reason = StopReason::max_len;
};

// Greedy decoding from BOS with a KV cache. Each step takes the argmax (ties
// go to the lowest id); BOS and PAD are never emitted. Stops on EOS or after
// max_len tokens. With a tokenizer, text is the decoded ids.
template <typename T>
GenerationResult greedy_generate(const FusedContext<T>& context, const ParamStore<T>& params,
                                 const DecoderConfig& cfg, int max_len, const Tokenizer* tokenizer = nullptr,
                                 bool want_maps = false);

// Builds one map per row of the final trace layer. Row t belongs to the
// token predicted at position t, i.e. token_ids[t] when given.
template <typename T>
std::vector<AttentionMap> extract_grounding(const CrossAttentionTrace<T>& trace, const FusedContext<T>& fused,
                                            std::span<const int> token_ids = {}, const Tokenizer* tokenizer = nullptr);

// Head-averaged, renormalized map from raw per-head weights [heads, ctx_len].
template <typename T>
AttentionMap attention_map_from_heads(const Tensor<T>& probs, const FusedContext<T>& fused);

// Fraction of the map's mass inside `box` on `plane`. Each cell's weight is
// spread uniformly over its pixels.
double box_attention_mass(const AttentionMap& map, int plane, const PixelBox& box, int image_size);

// Undoes preprocess normalization back to 8-bit RGB.
template <typename T>
Raster to_raster(const ImageTensor<T>& img);

struct HeatmapFiles {
    std::filesystem::path image;
    std::filesystem::path sidecar;
};

// Overlays the map on the valid images (side by side) and writes
// <stem>.png plus <stem>.txt with the raw grid values. Weights are scaled
// linearly from the map's min to max; a flat map leaves the base untouched.
HeatmapFiles render_heatmap(const AttentionMap& map, std::span<const Raster> bases, const std::filesystem::path& dir);

// Overlay raster for one plane, exposed for tests.
Raster overlay_plane(const AttentionMap& map, int plane, const Raster& base, double lo, double hi);

// "tok003_polyp" style stem: index plus the token with unsafe bytes replaced.
std::string heatmap_stem(const AttentionMap& map);
AttentionMap read_heatmap_sidecar(const std::filesystem::path& path);

}  // namespace endo

#pragma once

#include <array>

#include "endo/graph.hpp"
#include "endo/image.hpp"
#include "endo/layers.hpp"
#include "endo/param_store.hpp"
#include "endo/tensor.hpp"

namespace endo {

// ImageNet channel statistics.
inline constexpr std::array<double, 3> kImageMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageStd{0.229, 0.224, 0.225};

struct EncoderConfig {
    int image_size = 64;
    int patch_size = 16;
    int d_model = 128;
    int layers = 4;
    int heads = 4;
    int mlp_ratio = 4;
    bool final_norm = true;

    int grid() const { return image_size / patch_size; }
    int n_patches() const { return grid() * grid(); }
    int patch_dim() const { return patch_size * patch_size * 3; }
    void validate() const;

    static EncoderConfig desk() { return {}; }
    static EncoderConfig full_scale() { return {224, 16, 768, 12, 12, 4, true}; }

    bool operator==(const EncoderConfig&) const = default;
};

// Normalized pixels, [image_size, image_size, 3].
template <typename T>
struct ImageTensor {
    Tensor<T> pixels;
};

// Per-patch latents, [n_patches, d_model].
template <typename T>
struct PatchEmbeddings {
    Tensor<T> z;
};

// Bilinear resize (half-pixel centers) to image_size, then per channel
// (x/255 - mean_c) / std_c. Throws unless the raster has 3 channels.
template <typename T>
ImageTensor<T> preprocess(const Raster& raw, const EncoderConfig& cfg);

// [n_patches, patch_size^2 * 3]; patches row-major from the top-left, each
// flattened as (row, col, channel).
template <typename T>
Tensor<T> patchify(const ImageTensor<T>& img, const EncoderConfig& cfg);

template <typename T>
void add_encoder_params(ParamStore<T>& ps, const EncoderConfig& cfg);

// Verifies that every encoder tensor exists with the shape cfg implies.
template <typename T>
void check_encoder_params(const ParamStore<T>& ps, const EncoderConfig& cfg);

// Graph form, for training. Returns the [n_patches, d_model] node.
template <typename T>
typename Graph<T>::Id encode_image(ParamScope<T>& scope, const ImageTensor<T>& img, const EncoderConfig& cfg);

// Value form, for inference.
template <typename T>
PatchEmbeddings<T> encode_image(const ImageTensor<T>& img, const ParamStore<T>& params, const EncoderConfig& cfg);

}  // namespace endo

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "endo/graph.hpp"
#include "endo/layers.hpp"
#include "endo/vision_encoder.hpp"

namespace endo {

inline constexpr int kMaxImages = 12;
inline constexpr const char* kTemporalParam = "fuse.temporal";

// Decoder context built from up to max_images encoded images. Slot k occupies
// rows [k * patches, (k + 1) * patches). Only the first n_images slots are
// valid; the rest are zero-filled and must never reach any output.
template <typename T>
struct FusedContext {
    Tensor<T> memory;                 // [max_images * patches, d]
    std::vector<std::uint8_t> valid;  // per memory row, 1 = attendable
    int n_images = 0;
    int patches_per_image = 0;

    int max_images() const { return patches_per_image ? static_cast<int>(valid.size()) / patches_per_image : 0; }
    std::size_t valid_count() const;
};

// Learned per-slot vectors, [max_images, d].
template <typename T>
struct TemporalEmbedding {
    Tensor<T> table;
};

template <typename T>
void add_fusion_params(ParamStore<T>& ps, int d_model, int max_images = kMaxImages);

// Value form: slot k rows = z_k + temporal.table[k].
template <typename T>
FusedContext<T> assemble_context(std::span<const PatchEmbeddings<T>> images_z, const TemporalEmbedding<T>& temporal,
                                 int max_images = kMaxImages);

// Single-image context without temporal embedding (caption pretraining).
template <typename T>
FusedContext<T> single_image_context(const PatchEmbeddings<T>& z);

// Graph form. Returns the memory node; fills `valid`. Dummy slots are zero
// unless `dummy_fill` supplies their contents (used by invariance checks).
template <typename T>
typename Graph<T>::Id assemble_context(ParamScope<T>& scope, std::span<const typename Graph<T>::Id> images_z,
                                       int max_images, std::vector<std::uint8_t>& valid,
                                       const Tensor<T>* dummy_fill = nullptr);

enum class FilterDecision { keep, drop };

// Procedures with more images than the context holds are dropped.
FilterDecision max_image_filter(std::size_t image_count, int max_images = kMaxImages);

}  // namespace endo

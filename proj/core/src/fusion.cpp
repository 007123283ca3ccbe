#include "endo/fusion.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace endo {

namespace {

void check_count(std::size_t n, int max_images) {
    if (n == 0) throw std::invalid_argument("assemble_context: zero images");
    if (max_images < 1 || max_images > kMaxImages) {
        throw std::invalid_argument("assemble_context: max_images must be in [1, 12]");
    }
    if (n > static_cast<std::size_t>(max_images)) {
        throw std::invalid_argument("assemble_context: " + std::to_string(n) + " images exceed the limit of " +
                                    std::to_string(max_images));
    }
}

}  // namespace

template <typename T>
std::size_t FusedContext<T>::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

template <typename T>
void add_fusion_params(ParamStore<T>& ps, int d_model, int max_images) {
    ps.add(kTemporalParam, {std::size_t(max_images), std::size_t(d_model)});
}

template <typename T>
FusedContext<T> assemble_context(std::span<const PatchEmbeddings<T>> images_z, const TemporalEmbedding<T>& temporal,
                                 int max_images) {
    check_count(images_z.size(), max_images);
    const std::size_t patches = images_z[0].z.rows(), d = images_z[0].z.cols();
    if (temporal.table.rows() < static_cast<std::size_t>(max_images) || temporal.table.cols() != d) {
        throw std::invalid_argument("assemble_context: temporal table shape " + shape_str(temporal.table.shape()));
    }
    FusedContext<T> ctx;
    ctx.n_images = static_cast<int>(images_z.size());
    ctx.patches_per_image = static_cast<int>(patches);
    ctx.memory = Tensor<T>({patches * max_images, d});
    ctx.valid.assign(patches * max_images, 0);
    for (std::size_t k = 0; k < images_z.size(); ++k) {
        const auto& z = images_z[k].z;
        if (z.rows() != patches || z.cols() != d) throw std::invalid_argument("assemble_context: non-uniform image embeddings");
        const T* t = temporal.table.data() + k * d;
        for (std::size_t r = 0; r < patches; ++r) {
            T* dst = ctx.memory.data() + (k * patches + r) * d;
            const T* src = z.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] + t[j];
            ctx.valid[k * patches + r] = 1;
        }
    }
    return ctx;
}

template <typename T>
FusedContext<T> single_image_context(const PatchEmbeddings<T>& z) {
    FusedContext<T> ctx;
    ctx.memory = z.z;
    ctx.valid.assign(z.z.rows(), 1);
    ctx.n_images = 1;
    ctx.patches_per_image = static_cast<int>(z.z.rows());
    return ctx;
}

template <typename T>
typename Graph<T>::Id assemble_context(ParamScope<T>& scope, std::span<const typename Graph<T>::Id> images_z,
                                       int max_images, std::vector<std::uint8_t>& valid,
                                       const Tensor<T>* dummy_fill) {
    check_count(images_z.size(), max_images);
    auto& g = scope.graph();
    const std::size_t patches = g.value(images_z[0]).rows();
    const auto temporal = scope(kTemporalParam);
    std::vector<typename Graph<T>::Id> parts;
    for (std::size_t k = 0; k < images_z.size(); ++k) {
        if (g.value(images_z[k]).rows() != patches) throw std::invalid_argument("assemble_context: non-uniform images");
        parts.push_back(g.add_row(images_z[k], temporal, k));
    }
    valid.assign(patches * max_images, 0);
    std::fill(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(patches * images_z.size()), 1);
    return g.concat_rows(parts, patches * max_images, dummy_fill);
}

FilterDecision max_image_filter(std::size_t image_count, int max_images) {
    return image_count > static_cast<std::size_t>(max_images) ? FilterDecision::drop : FilterDecision::keep;
}

#define ENDO_INSTANTIATE(T)                                                                                      \
    template struct FusedContext<T>;                                                                             \
    template void add_fusion_params(ParamStore<T>&, int, int);                                                   \
    template FusedContext<T> assemble_context(std::span<const PatchEmbeddings<T>>, const TemporalEmbedding<T>&, \
                                              int);                                                              \
    template FusedContext<T> single_image_context(const PatchEmbeddings<T>&);                                    \
    template Graph<T>::Id assemble_context(ParamScope<T>&, std::span<const Graph<T>::Id>, int,                   \
                                           std::vector<std::uint8_t>&, const Tensor<T>*);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

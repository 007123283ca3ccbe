#include "endo/vision_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace endo {

void EncoderConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
        throw std::invalid_argument("encoder: image_size must be a positive multiple of patch_size");
    }
    if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
        throw std::invalid_argument("encoder: d_model must be divisible by heads");
    }
    if (layers < 0 || mlp_ratio <= 0) throw std::invalid_argument("encoder: bad layers/mlp_ratio");
}

template <typename T>
ImageTensor<T> preprocess(const Raster& raw, const EncoderConfig& cfg) {
    if (raw.channels != 3) {
        throw std::invalid_argument("preprocess: expected 3 channels, got " + std::to_string(raw.channels));
    }
    if (raw.width <= 0 || raw.height <= 0) throw std::invalid_argument("preprocess: empty image");
    const int out = cfg.image_size;
    ImageTensor<T> img{Tensor<T>({std::size_t(out), std::size_t(out), 3})};
    const double sx = static_cast<double>(raw.width) / out;
    const double sy = static_cast<double>(raw.height) / out;
    auto src_coord = [](double dst, double scale, int limit, int& i0, int& i1, double& frac) {
        double s = (dst + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(limit - 1));
        i0 = static_cast<int>(std::floor(s));
        i1 = std::min(i0 + 1, limit - 1);
        frac = s - i0;
    };
    for (int y = 0; y < out; ++y) {
        int y0, y1;
        double fy;
        src_coord(y, sy, raw.height, y0, y1, fy);
        for (int x = 0; x < out; ++x) {
            int x0, x1;
            double fx;
            src_coord(x, sx, raw.width, x0, x1, fx);
            for (int c = 0; c < 3; ++c) {
                const double top = raw.at(x0, y0, c) * (1 - fx) + raw.at(x1, y0, c) * fx;
                const double bot = raw.at(x0, y1, c) * (1 - fx) + raw.at(x1, y1, c) * fx;
                const double v = top * (1 - fy) + bot * fy;
                img.pixels[(std::size_t(y) * out + x) * 3 + c] = static_cast<T>((v / 255.0 - kImageMean[c]) / kImageStd[c]);
            }
        }
    }
    return img;
}

template <typename T>
Tensor<T> patchify(const ImageTensor<T>& img, const EncoderConfig& cfg) {
    cfg.validate();
    const auto& px = img.pixels;
    const std::size_t size = cfg.image_size;
    if (px.rank() != 3 || px.dim(0) != size || px.dim(1) != size || px.dim(2) != 3) {
        throw std::invalid_argument("patchify: image shape " + shape_str(px.shape()) + " does not match config size " +
                                    std::to_string(size));
    }
    const std::size_t p = cfg.patch_size, grid = cfg.grid();
    Tensor<T> out({grid * grid, p * p * 3});
    for (std::size_t gy = 0; gy < grid; ++gy) {
        for (std::size_t gx = 0; gx < grid; ++gx) {
            T* dst = out.data() + (gy * grid + gx) * p * p * 3;
            for (std::size_t r = 0; r < p; ++r) {
                const T* src = px.data() + ((gy * p + r) * size + gx * p) * 3;
                std::copy(src, src + p * 3, dst + r * p * 3);
            }
        }
    }
    return out;
}

namespace {

std::string block(int i) { return "enc.l" + std::to_string(i); }

}  // namespace

template <typename T>
void add_encoder_params(ParamStore<T>& ps, const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.d_model;
    add_linear(ps, "enc.patch", cfg.patch_dim(), d);
    ps.add("enc.pos", {std::size_t(cfg.n_patches()), d});
    for (int i = 0; i < cfg.layers; ++i) {
        const auto b = block(i);
        add_norm(ps, b + ".ln1", d);
        for (const char* proj : {".q", ".k", ".v", ".o"}) add_linear(ps, b + ".attn" + proj, d, d);
        add_norm(ps, b + ".ln2", d);
        add_linear(ps, b + ".mlp.fc1", d, d * cfg.mlp_ratio);
        add_linear(ps, b + ".mlp.fc2", d * cfg.mlp_ratio, d);
    }
    if (cfg.final_norm) add_norm(ps, "enc.ln_f", d);
}

template <typename T>
void check_encoder_params(const ParamStore<T>& ps, const EncoderConfig& cfg) {
    ParamStore<T> expected;
    add_encoder_params(expected, cfg);
    for (const auto& [name, p] : expected.entries()) {
        if (!ps.contains(name)) throw std::invalid_argument("encoder parameter '" + name + "' missing");
        if (ps.at(name).value.shape() != p.value.shape()) {
            throw std::invalid_argument("encoder parameter '" + name + "' has shape " +
                                        shape_str(ps.at(name).value.shape()) + ", config expects " +
                                        shape_str(p.value.shape()));
        }
    }
}

template <typename T>
typename Graph<T>::Id encode_image(ParamScope<T>& scope, const ImageTensor<T>& img, const EncoderConfig& cfg) {
    auto& g = scope.graph();
    auto x = g.input(patchify(img, cfg));
    x = layers::linear(scope, "enc.patch", x);
    x = g.add(x, scope("enc.pos"));
    const AttentionSpec spec{static_cast<std::size_t>(cfg.heads), false, nullptr};
    for (int i = 0; i < cfg.layers; ++i) {
        const auto b = block(i);
        auto h = layers::norm(scope, b + ".ln1", x);
        x = g.add(x, layers::multi_head_attention(scope, b + ".attn", h, h, spec));
        h = layers::norm(scope, b + ".ln2", x);
        x = g.add(x, layers::mlp(scope, b + ".mlp", h));
    }
    if (cfg.final_norm) x = layers::norm(scope, "enc.ln_f", x);
    return x;
}

template <typename T>
PatchEmbeddings<T> encode_image(const ImageTensor<T>& img, const ParamStore<T>& params, const EncoderConfig& cfg) {
    check_encoder_params(params, cfg);
    Graph<T> g(false);
    ParamScope<T> scope(g, params);
    const auto z = encode_image(scope, img, cfg);
    return {g.value(z)};
}

#define ENDO_INSTANTIATE(T)                                                                              \
    template ImageTensor<T> preprocess(const Raster&, const EncoderConfig&);                             \
    template Tensor<T> patchify(const ImageTensor<T>&, const EncoderConfig&);                            \
    template void add_encoder_params(ParamStore<T>&, const EncoderConfig&);                              \
    template void check_encoder_params(const ParamStore<T>&, const EncoderConfig&);                      \
    template Graph<T>::Id encode_image(ParamScope<T>&, const ImageTensor<T>&, const EncoderConfig&);     \
    template PatchEmbeddings<T> encode_image(const ImageTensor<T>&, const ParamStore<T>&, const EncoderConfig&);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

#include "endo/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "endo/vision_encoder.hpp"

namespace endo {

double AttentionMap::total() const {
    double s = 0;
    for (double w : weights.span()) s += w;
    return s;
}

std::string_view stop_reason_name(StopReason r) { return r == StopReason::eos ? "eos" : "max_len"; }

namespace {

int grid_of(int patches) {
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(patches))));
    if (g * g != patches) throw std::invalid_argument("context patches do not form a square grid");
    return g;
}

template <typename T>
void check_context(const FusedContext<T>& ctx) {
    if (ctx.patches_per_image <= 0 || ctx.valid.size() != ctx.memory.rows() || ctx.valid_count() == 0 ||
        ctx.valid.size() % static_cast<std::size_t>(ctx.patches_per_image) != 0) {
        throw std::invalid_argument("invalid fused context");
    }
}

void label(AttentionMap& map, int index, int id, const Tokenizer* tok) {
    map.token_index = index;
    map.token_id = id;
    if (tok && id >= 0) map.token_string = tok->token_bytes(id);
}

}  // namespace

template <typename T>
AttentionMap attention_map_from_heads(const Tensor<T>& probs, const FusedContext<T>& fused) {
    check_context(fused);
    const std::size_t ctx_len = fused.valid.size();
    if (probs.cols() != ctx_len) throw std::invalid_argument("attention weights do not match the context length");
    const std::size_t heads = probs.rows();
    std::vector<double> avg(ctx_len, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t j = 0; j < ctx_len; ++j) avg[j] += static_cast<double>(probs.at(h, j));
    for (auto& a : avg) a /= static_cast<double>(heads);
    double sum = 0;
    for (std::size_t j = 0; j < ctx_len; ++j)
        if (fused.valid[j]) sum += avg[j];
    if (!(sum > 0)) throw std::domain_error("attention map has no mass on valid positions");

    const int grid = grid_of(fused.patches_per_image);
    const std::size_t planes = ctx_len / static_cast<std::size_t>(fused.patches_per_image);
    AttentionMap map;
    map.n_images = fused.n_images;
    map.weights = Tensor<double>({planes, std::size_t(grid), std::size_t(grid)});
    for (std::size_t j = 0; j < ctx_len; ++j) map.weights[j] = fused.valid[j] ? avg[j] / sum : 0.0;
    return map;
}

template <typename T>
std::vector<AttentionMap> extract_grounding(const CrossAttentionTrace<T>& trace, const FusedContext<T>& fused,
                                            std::span<const int> token_ids, const Tokenizer* tokenizer) {
    if (trace.layers.empty()) throw std::invalid_argument("extract_grounding: no attention trace captured");
    const auto& last = trace.layers.back();
    if (last.rank() != 3) throw std::invalid_argument("extract_grounding: trace layer must be [heads, T, ctx]");
    const std::size_t heads = last.dim(0), t_len = last.dim(1), ctx_len = last.dim(2);
    std::vector<AttentionMap> maps;
    maps.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        Tensor<T> probs({heads, ctx_len});
        for (std::size_t h = 0; h < heads; ++h)
            std::copy_n(last.data() + (h * t_len + t) * ctx_len, ctx_len, probs.data() + h * ctx_len);
        auto map = attention_map_from_heads(probs, fused);
        label(map, static_cast<int>(t), t < token_ids.size() ? token_ids[t] : -1, tokenizer);
        maps.push_back(std::move(map));
    }
    return maps;
}

template <typename T>
GenerationResult greedy_generate(const FusedContext<T>& context, const ParamStore<T>& params,
                                 const DecoderConfig& cfg, int max_len, const Tokenizer* tokenizer, bool want_maps) {
    if (max_len < 1) throw std::invalid_argument("greedy_generate: max_len must be at least 1");
    if (max_len > cfg.max_seq_len) {
        throw std::invalid_argument("greedy_generate: max_len " + std::to_string(max_len) + " exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len));
    }
    check_context(context);
    IncrementalDecoder<T> dec(params, cfg, context);
    GenerationResult res;
    int token = Tokenizer::kBos;
    const int vocab = cfg.vocab_size;
    for (int k = 0; k < max_len; ++k) {
        const auto logits = dec.step(token);
        int best = -1;
        for (int id = 0; id < vocab; ++id) {
            if (id == Tokenizer::kBos || id == Tokenizer::kPad) continue;
            if (best < 0 || logits[id] > logits[best]) best = id;
        }
        if (best == Tokenizer::kEos) {
            res.stop_reason = StopReason::eos;
            break;
        }
        res.ids.push_back(best);
        if (want_maps) {
            auto map = attention_map_from_heads(dec.cross_probs(std::size_t(cfg.layers - 1)), context);
            label(map, k, best, tokenizer);
            res.maps.push_back(std::move(map));
        }
        token = best;
    }
    if (tokenizer) res.text = tokenizer->decode(res.ids);
    return res;
}

double box_attention_mass(const AttentionMap& map, int plane, const PixelBox& box, int image_size) {
    const int grid = map.grid();
    if (grid <= 0 || image_size % grid != 0) throw std::invalid_argument("box_attention_mass: bad grid geometry");
    if (plane < 0 || static_cast<std::size_t>(plane) >= map.weights.dim(0)) {
        throw std::out_of_range("box_attention_mass: plane out of range");
    }
    const int cell = image_size / grid;
    const double cell_area = double(cell) * cell;
    double mass = 0;
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            const int ox = std::max(0, std::min(box.x1, (gx + 1) * cell) - std::max(box.x0, gx * cell));
            const int oy = std::max(0, std::min(box.y1, (gy + 1) * cell) - std::max(box.y0, gy * cell));
            if (ox == 0 || oy == 0) continue;
            const double w = map.weights[(std::size_t(plane) * grid + gy) * grid + gx];
            mass += w * (double(ox) * oy) / cell_area;
        }
    }
    return mass;
}

template <typename T>
Raster to_raster(const ImageTensor<T>& img) {
    const auto& px = img.pixels;
    if (px.rank() != 3 || px.dim(2) != 3) throw std::invalid_argument("to_raster: expected [H, W, 3]");
    Raster r(static_cast<int>(px.dim(1)), static_cast<int>(px.dim(0)), 3);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const std::size_t c = i % 3;
        const double v = (static_cast<double>(px[i]) * kImageStd[c] + kImageMean[c]) * 255.0;
        r.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return r;
}

Raster overlay_plane(const AttentionMap& map, int plane, const Raster& base, double lo, double hi) {
    if (base.channels != 3) throw std::invalid_argument("overlay_plane: base must be RGB");
    const int grid = map.grid();
    Raster out = base;
    if (!(hi > lo)) return out;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            const int gy = y * grid / base.height, gx = x * grid / base.width;
            const double w = map.weights[(std::size_t(plane) * grid + gy) * grid + gx];
            const double t = std::clamp((w - lo) / (hi - lo), 0.0, 1.0);
            const double a = 0.6 * t;
            // dark blue at the minimum, yellow at the maximum
            const double color[3] = {255.0 * t, 255.0 * t, 128.0 * (1.0 - t)};
            for (int c = 0; c < 3; ++c) {
                const double v = (1.0 - a) * base.at(x, y, c) + a * color[c];
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

std::string heatmap_stem(const AttentionMap& map) {
    char idx[32];
    std::snprintf(idx, sizeof idx, "tok%03d_", map.token_index);
    std::string stem = idx;
    for (unsigned char c : map.token_string) {
        stem += (std::isalnum(c) || c == '-') ? static_cast<char>(c) : '_';
    }
    if (map.token_string.empty()) stem += "_";
    return stem;
}

namespace {

void write_text_atomic(const std::filesystem::path& path, const std::string& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << body;
        if (!f.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

HeatmapFiles render_heatmap(const AttentionMap& map, std::span<const Raster> bases, const std::filesystem::path& dir) {
    if (map.weights.rank() != 3) throw std::invalid_argument("render_heatmap: empty map");
    const int shown = std::max(1, map.n_images);
    if (bases.size() < static_cast<std::size_t>(shown)) {
        throw std::invalid_argument("render_heatmap: need one base image per valid slot");
    }
    const int w = bases[0].width, h = bases[0].height;
    double lo = 0, hi = 0;
    bool first = true;
    const std::size_t cells = std::size_t(map.grid()) * map.grid();
    for (std::size_t i = 0; i < cells * std::size_t(shown); ++i) {
        lo = first ? map.weights[i] : std::min(lo, map.weights[i]);
        hi = first ? map.weights[i] : std::max(hi, map.weights[i]);
        first = false;
    }
    Raster strip(w * shown, h, 3);
    for (int k = 0; k < shown; ++k) {
        if (bases[k].width != w || bases[k].height != h) throw std::invalid_argument("render_heatmap: mixed base sizes");
        const Raster o = overlay_plane(map, k, bases[k], lo, hi);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) strip.at(k * w + x, y, c) = o.at(x, y, c);
    }
    std::filesystem::create_directories(dir);
    const auto stem = heatmap_stem(map);
    HeatmapFiles files{dir / (stem + ".png"), dir / (stem + ".txt")};
    write_png(files.image, strip);

    std::ostringstream s;
    s << "endoattn 1\n";
    s << "token_index " << map.token_index << "\n";
    s << "token_id " << map.token_id << "\n";
    s << "token " << escape_bytes(map.token_string) << "\n";
    s << "planes " << map.weights.dim(0) << " grid " << map.grid() << " n_images " << map.n_images << "\n";
    char buf[40];
    for (std::size_t p = 0; p < map.weights.dim(0); ++p) {
        s << "plane " << p << "\n";
        for (int gy = 0; gy < map.grid(); ++gy) {
            for (int gx = 0; gx < map.grid(); ++gx) {
                std::snprintf(buf, sizeof buf, "%.17g", map.weights[(p * map.grid() + gy) * map.grid() + gx]);
                s << (gx ? " " : "") << buf;
            }
            s << "\n";
        }
    }
    write_text_atomic(files.sidecar, s.str());
    return files;
}

AttentionMap read_heatmap_sidecar(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    auto expect = [&](const std::string& word) {
        std::string got;
        if (!(f >> got) || got != word) throw std::runtime_error(path.string() + ": expected '" + word + "'");
    };
    AttentionMap map;
    int version = 0;
    expect("endoattn");
    f >> version;
    if (version != 1) throw std::runtime_error(path.string() + ": unsupported sidecar version");
    expect("token_index");
    f >> map.token_index;
    expect("token_id");
    f >> map.token_id;
    expect("token");
    std::string tok;
    f.get();
    std::getline(f, tok);
    map.token_string = unescape_bytes(tok);
    std::size_t planes = 0, grid = 0;
    expect("planes");
    f >> planes;
    expect("grid");
    f >> grid;
    expect("n_images");
    f >> map.n_images;
    map.weights = Tensor<double>({planes, grid, grid});
    for (std::size_t p = 0; p < planes; ++p) {
        std::size_t idx = 0;
        expect("plane");
        f >> idx;
        for (std::size_t i = 0; i < grid * grid; ++i) f >> map.weights[p * grid * grid + i];
    }
    if (!f) throw std::runtime_error(path.string() + ": truncated sidecar");
    return map;
}

#define ENDO_INSTANTIATE(T)                                                                                         \
    template AttentionMap attention_map_from_heads(const Tensor<T>&, const FusedContext<T>&);                       \
    template std::vector<AttentionMap> extract_grounding(const CrossAttentionTrace<T>&, const FusedContext<T>&,     \
                                                         std::span<const int>, const Tokenizer*);                   \
    template GenerationResult greedy_generate(const FusedContext<T>&, const ParamStore<T>&, const DecoderConfig&, \
                                              int, const Tokenizer*, bool);                                         \
    template Raster to_raster(const ImageTensor<T>&);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

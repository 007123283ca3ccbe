#include "endo/text_decoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "endo/kernels.hpp"

namespace endo {

void DecoderConfig::validate() const {
    if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
        throw std::invalid_argument("decoder: d_model must be divisible by heads");
    }
    if (max_seq_len < 2) throw std::invalid_argument("decoder: max_seq_len must be at least 2");
    if (vocab_size <= 0) throw std::invalid_argument("decoder: vocab_size not set");
    if (layers < 0 || mlp_ratio <= 0 || context_dim <= 0) throw std::invalid_argument("decoder: bad layers/mlp/context");
}

std::vector<std::uint8_t> causal_mask(std::size_t t) {
    if (t == 0) throw std::invalid_argument("causal_mask: T must be at least 1");
    std::vector<std::uint8_t> m(t * t, 0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j <= i; ++j) m[i * t + j] = 1;
    return m;
}

namespace {

std::string block(int i) { return "dec.l" + std::to_string(i); }

}  // namespace

template <typename T>
void add_decoder_params(ParamStore<T>& ps, const DecoderConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.d_model, ctx = cfg.context_dim;
    ps.add("dec.tok", {std::size_t(cfg.vocab_size), d});
    ps.add("dec.pos", {std::size_t(cfg.max_seq_len), d});
    for (int i = 0; i < cfg.layers; ++i) {
        const auto b = block(i);
        add_norm(ps, b + ".ln1", d);
        for (const char* p : {".q", ".k", ".v", ".o"}) add_linear(ps, b + ".self" + p, d, d);
        add_norm(ps, b + ".ln2", d);
        add_linear(ps, b + ".cross.q", d, d);
        add_linear(ps, b + ".cross.k", ctx, d);
        add_linear(ps, b + ".cross.v", ctx, d);
        add_linear(ps, b + ".cross.o", d, d);
        add_norm(ps, b + ".ln3", d);
        add_linear(ps, b + ".mlp.fc1", d, d * cfg.mlp_ratio);
        add_linear(ps, b + ".mlp.fc2", d * cfg.mlp_ratio, d);
    }
    add_norm(ps, "dec.ln_f", d);
    add_linear(ps, "dec.head", d, std::size_t(cfg.vocab_size));
}

template <typename T>
void check_decoder_params(const ParamStore<T>& ps, const DecoderConfig& cfg) {
    ParamStore<T> expected;
    add_decoder_params(expected, cfg);
    for (const auto& [name, p] : expected.entries()) {
        if (!ps.contains(name)) throw std::invalid_argument("decoder parameter '" + name + "' missing");
        if (ps.at(name).value.shape() != p.value.shape()) {
            throw std::invalid_argument("decoder parameter '" + name + "' has shape " +
                                        shape_str(ps.at(name).value.shape()) + ", config expects " +
                                        shape_str(p.value.shape()));
        }
    }
}

template <typename T>
typename Graph<T>::Id decoder_forward(ParamScope<T>& scope, std::span<const int> tokens, typename Graph<T>::Id memory,
                                      const std::vector<std::uint8_t>& valid, const DecoderConfig& cfg,
                                      std::vector<typename Graph<T>::Id>* cross_nodes) {
    if (tokens.empty()) throw std::invalid_argument("decoder_forward: empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(cfg.max_seq_len)) {
        throw std::invalid_argument("decoder_forward: sequence of " + std::to_string(tokens.size()) +
                                    " tokens exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    auto& g = scope.graph();
    if (valid.size() != g.value(memory).rows()) throw std::invalid_argument("decoder_forward: context mask length mismatch");
    std::vector<int> positions(tokens.size());
    std::iota(positions.begin(), positions.end(), 0);
    auto x = g.add(g.embed(scope("dec.tok"), tokens), g.embed(scope("dec.pos"), positions));
    const auto heads = static_cast<std::size_t>(cfg.heads);
    const AttentionSpec self_spec{heads, true, nullptr};
    const AttentionSpec cross_spec{heads, false, &valid};
    if (cross_nodes) cross_nodes->clear();
    for (int i = 0; i < cfg.layers; ++i) {
        const auto b = block(i);
        auto h = layers::norm(scope, b + ".ln1", x);
        x = g.add(x, layers::multi_head_attention(scope, b + ".self", h, h, self_spec));
        h = layers::norm(scope, b + ".ln2", x);
        typename Graph<T>::Id attn = Graph<T>::kNone;
        x = g.add(x, layers::multi_head_attention(scope, b + ".cross", h, memory, cross_spec, &attn));
        if (cross_nodes) cross_nodes->push_back(attn);
        h = layers::norm(scope, b + ".ln3", x);
        x = g.add(x, layers::mlp(scope, b + ".mlp", h));
    }
    x = layers::norm(scope, "dec.ln_f", x);
    return layers::linear(scope, "dec.head", x);
}

template <typename T>
DecoderOutput<T> decoder_forward(std::span<const int> tokens, const FusedContext<T>& context,
                                 const ParamStore<T>& params, const DecoderConfig& cfg, bool want_trace) {
    check_decoder_params(params, cfg);
    if (context.memory.cols() != static_cast<std::size_t>(cfg.context_dim) || context.valid.size() != context.memory.rows() ||
        context.valid_count() == 0) {
        throw std::invalid_argument("decoder_forward: invalid context");
    }
    Graph<T> g(false);
    ParamScope<T> scope(g, params);
    const auto memory = g.input(context.memory);
    std::vector<typename Graph<T>::Id> cross;
    const auto logits = decoder_forward(scope, tokens, memory, context.valid, cfg, &cross);
    DecoderOutput<T> out{g.value(logits), std::nullopt};
    if (want_trace) {
        CrossAttentionTrace<T> trace;
        for (auto id : cross) trace.layers.push_back(g.attention_probs(id));
        out.attention_trace = std::move(trace);
    }
    return out;
}

template <typename T>
IncrementalDecoder<T>::IncrementalDecoder(const ParamStore<T>& params, const DecoderConfig& cfg,
                                          const FusedContext<T>& context)
    : params_(params), cfg_(cfg), valid_(context.valid) {
    check_decoder_params(params, cfg);
    const std::size_t d = cfg.d_model, ctx_len = context.memory.rows();
    if (context.memory.cols() != static_cast<std::size_t>(cfg.context_dim) || valid_.size() != ctx_len ||
        context.valid_count() == 0) {
        throw std::invalid_argument("IncrementalDecoder: invalid context");
    }
    cache_.resize(cfg.layers);
    for (int i = 0; i < cfg.layers; ++i) {
        const auto b = block(i);
        auto& c = cache_[i];
        c.self_k = Tensor<T>({std::size_t(cfg.max_seq_len), d});
        c.self_v = Tensor<T>({std::size_t(cfg.max_seq_len), d});
        c.cross_k = Tensor<T>({ctx_len, d});
        c.cross_v = Tensor<T>({ctx_len, d});
        kernels::linear(context.memory.data(), w(b + ".cross.k.w"), w(b + ".cross.k.b"), c.cross_k.data(), ctx_len,
                        cfg.context_dim, d);
        kernels::linear(context.memory.data(), w(b + ".cross.v.w"), w(b + ".cross.v.b"), c.cross_v.data(), ctx_len,
                        cfg.context_dim, d);
    }
    cross_probs_.assign(cfg.layers, Tensor<T>({std::size_t(cfg.heads), ctx_len}));
    logits_.resize(cfg.vocab_size);
}

template <typename T>
std::span<const T> IncrementalDecoder<T>::step(int token) {
    if (pos_ >= static_cast<std::size_t>(cfg_.max_seq_len)) {
        throw std::invalid_argument("IncrementalDecoder: max_seq_len reached");
    }
    if (token < 0 || token >= cfg_.vocab_size) throw std::out_of_range("IncrementalDecoder: token id out of range");
    const std::size_t d = cfg_.d_model, heads = cfg_.heads, hd = d / heads, hidden = d * cfg_.mlp_ratio;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    const T eps = T(1e-5);
    std::vector<T> x(d), h(d), q(d), a(d), o(d), m(hidden);
    const T* tok = w("dec.tok") + std::size_t(token) * d;
    const T* pos = w("dec.pos") + pos_ * d;
    for (std::size_t j = 0; j < d; ++j) x[j] = tok[j] + pos[j];

    auto residual = [&](const std::vector<T>& delta) {
        for (std::size_t j = 0; j < d; ++j) x[j] = x[j] + delta[j];
    };
    std::vector<T> probs(std::max<std::size_t>(pos_ + 1, valid_.size()));
    for (int i = 0; i < cfg_.layers; ++i) {
        const auto b = block(i);
        auto& c = cache_[i];
        kernels::layer_norm_row(x.data(), w(b + ".ln1.g"), w(b + ".ln1.b"), eps, h.data(), d);
        kernels::linear(h.data(), w(b + ".self.q.w"), w(b + ".self.q.b"), q.data(), 1, d, d);
        kernels::linear(h.data(), w(b + ".self.k.w"), w(b + ".self.k.b"), c.self_k.data() + pos_ * d, 1, d, d);
        kernels::linear(h.data(), w(b + ".self.v.w"), w(b + ".self.v.b"), c.self_v.data() + pos_ * d, 1, d, d);
        for (std::size_t hh = 0; hh < heads; ++hh) {
            kernels::attend_row(q.data() + hh * hd, c.self_k.data() + hh * hd, c.self_v.data() + hh * hd, d, hd,
                                pos_ + 1, scale, [](std::size_t) { return true; }, probs.data(), a.data() + hh * hd);
        }
        kernels::linear(a.data(), w(b + ".self.o.w"), w(b + ".self.o.b"), o.data(), 1, d, d);
        residual(o);

        kernels::layer_norm_row(x.data(), w(b + ".ln2.g"), w(b + ".ln2.b"), eps, h.data(), d);
        kernels::linear(h.data(), w(b + ".cross.q.w"), w(b + ".cross.q.b"), q.data(), 1, d, d);
        const std::size_t ctx_len = valid_.size();
        for (std::size_t hh = 0; hh < heads; ++hh) {
            T* p = cross_probs_[i].data() + hh * ctx_len;
            kernels::attend_row(q.data() + hh * hd, c.cross_k.data() + hh * hd, c.cross_v.data() + hh * hd, d, hd,
                                ctx_len, scale, [this](std::size_t j) { return valid_[j] != 0; }, p,
                                a.data() + hh * hd);
        }
        kernels::linear(a.data(), w(b + ".cross.o.w"), w(b + ".cross.o.b"), o.data(), 1, d, d);
        residual(o);

        kernels::layer_norm_row(x.data(), w(b + ".ln3.g"), w(b + ".ln3.b"), eps, h.data(), d);
        kernels::linear(h.data(), w(b + ".mlp.fc1.w"), w(b + ".mlp.fc1.b"), m.data(), 1, d, hidden);
        for (auto& v : m) v = kernels::gelu(v);
        kernels::linear(m.data(), w(b + ".mlp.fc2.w"), w(b + ".mlp.fc2.b"), o.data(), 1, hidden, d);
        residual(o);
    }
    kernels::layer_norm_row(x.data(), w("dec.ln_f.g"), w("dec.ln_f.b"), eps, h.data(), d);
    kernels::linear(h.data(), w("dec.head.w"), w("dec.head.b"), logits_.data(), 1, d, std::size_t(cfg_.vocab_size));
    ++pos_;
    return logits_;
}

#define ENDO_INSTANTIATE(T)                                                                                         \
    template void add_decoder_params(ParamStore<T>&, const DecoderConfig&);                                         \
    template void check_decoder_params(const ParamStore<T>&, const DecoderConfig&);                                 \
    template Graph<T>::Id decoder_forward(ParamScope<T>&, std::span<const int>, Graph<T>::Id,                       \
                                          const std::vector<std::uint8_t>&, const DecoderConfig&,                   \
                                          std::vector<Graph<T>::Id>*);                                              \
    template DecoderOutput<T> decoder_forward(std::span<const int>, const FusedContext<T>&, const ParamStore<T>&, \
                                              const DecoderConfig&, bool);                                          \
    template class IncrementalDecoder<T>;
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

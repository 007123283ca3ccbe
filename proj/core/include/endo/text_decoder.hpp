#pragma once

#include <optional>
#include <span>
#include <vector>

#include "endo/fusion.hpp"
#include "endo/graph.hpp"
#include "endo/layers.hpp"
#include "endo/tokenizer.hpp"

namespace endo {

struct DecoderConfig {
    int layers = 3;
    int heads = 4;
    int d_model = 128;
    int max_seq_len = 256;
    int vocab_size = 0;
    int mlp_ratio = 4;
    // Width of the encoder output consumed by cross-attention keys/values.
    int context_dim = 128;

    void validate() const;
    bool operator==(const DecoderConfig&) const = default;
};

// Cross-attention weights for one forward pass: per layer, [heads, T, context_len].
template <typename T>
struct CrossAttentionTrace {
    std::vector<Tensor<T>> layers;
};

template <typename T>
struct DecoderOutput {
    Tensor<T> logits;  // [T, vocab_size]
    std::optional<CrossAttentionTrace<T>> attention_trace;
};

// Row-major [t, t]; entry (i, j) is 1 (attendable) iff j <= i.
std::vector<std::uint8_t> causal_mask(std::size_t t);

template <typename T>
void add_decoder_params(ParamStore<T>& ps, const DecoderConfig& cfg);

template <typename T>
void check_decoder_params(const ParamStore<T>& ps, const DecoderConfig& cfg);

// Graph form. `cross_nodes`, when given, receives each layer's cross-attention node.
template <typename T>
typename Graph<T>::Id decoder_forward(ParamScope<T>& scope, std::span<const int> tokens, typename Graph<T>::Id memory,
                                      const std::vector<std::uint8_t>& valid, const DecoderConfig& cfg,
                                      std::vector<typename Graph<T>::Id>* cross_nodes = nullptr);

// Value form.
template <typename T>
DecoderOutput<T> decoder_forward(std::span<const int> tokens, const FusedContext<T>& context,
                                 const ParamStore<T>& params, const DecoderConfig& cfg, bool want_trace);

// Token-at-a-time decoding with cached keys/values. Produces logits that are
// bitwise identical to decoder_forward over the same prefix.
template <typename T>
class IncrementalDecoder {
public:
    IncrementalDecoder(const ParamStore<T>& params, const DecoderConfig& cfg, const FusedContext<T>& context);

    // Appends `token` at the next position and returns logits for the
    // following token.
    std::span<const T> step(int token);

    std::size_t position() const { return pos_; }
    // Last step's cross-attention weights for `layer`, [heads, context_len].
    const Tensor<T>& cross_probs(std::size_t layer) const { return cross_probs_.at(layer); }

private:
    struct LayerCache {
        Tensor<T> self_k, self_v;    // [max_seq_len, d]
        Tensor<T> cross_k, cross_v;  // [context_len, d]
    };

    const T* w(const std::string& name) const { return params_.at(name).value.data(); }

    const ParamStore<T>& params_;
    DecoderConfig cfg_;
    std::vector<std::uint8_t> valid_;
    std::vector<LayerCache> cache_;
    std::vector<Tensor<T>> cross_probs_;
    std::vector<T> logits_;
    std::size_t pos_ = 0;
};

}  // namespace endo

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "endo/fusion.hpp"
#include "endo/text_decoder.hpp"
#include "endo/tokenizer.hpp"
#include "endo/vision_encoder.hpp"

namespace endo {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
    int max_images = kMaxImages;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;

    // Desk defaults with vocab_size left for the caller to fill in.
    static ModelConfig desk(int vocab_size);
    // The gradient-check geometry: image 32, patch 16, widths 32, 2 layers, 2 heads.
    static ModelConfig tiny(int vocab_size);
};

std::string model_config_to_json(const ModelConfig& cfg);
// Unknown keys are rejected; absent keys keep their defaults.
ModelConfig model_config_from_json(std::string_view text);

// Encoder, decoder and temporal-slot parameters under one store. The
// temporal table exists even for caption-only use so that checkpoints from
// both stages share one layout.
template <typename T>
struct Model {
    ModelConfig cfg;
    ParamStore<T> params;

    static Model create(const ModelConfig& cfg, std::uint64_t seed);
    // Allocates the layout without initializing values.
    static Model shell(const ModelConfig& cfg);
    void check() const;
};

// Teacher-forcing split: input [BOS, y...], targets [y..., EOS].
struct TeacherForcing {
    std::vector<int> input;
    std::vector<int> target;
};
// bos/eos default to the tokenizer's ids; small synthetic vocabularies pass their own.
TeacherForcing teacher_forcing(std::span<const int> text_ids, int max_seq_len, int bos = Tokenizer::kBos,
                               int eos = Tokenizer::kEos);

// Mean cross-entropy over the T+1 predicted positions (text plus EOS).
template <typename T>
T lm_loss(const Tensor<T>& logits, std::span<const int> targets);

// Graph forms used by the training loop. Each returns the scalar loss node.
template <typename T>
typename Graph<T>::Id caption_loss(ParamScope<T>& scope, const ModelConfig& cfg, const ImageTensor<T>& image,
                                   const TeacherForcing& tf);

// `dummy_fill` ([max_images * patches, d]) overrides the zero content of
// unused slots; the loss must not depend on it.
template <typename T>
typename Graph<T>::Id findings_loss(ParamScope<T>& scope, const ModelConfig& cfg,
                                    std::span<const ImageTensor<T>* const> images, const TeacherForcing& tf,
                                    const Tensor<T>* dummy_fill = nullptr);

// Value forms used at inference.
template <typename T>
FusedContext<T> caption_context(const Model<T>& model, const ImageTensor<T>& image);

template <typename T>
FusedContext<T> findings_context(const Model<T>& model, std::span<const ImageTensor<T>* const> images);

}  // namespace endo

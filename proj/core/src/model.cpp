#include "endo/model.hpp"

#include <stdexcept>

#include "endo/numerics.hpp"
#include "json_util.hpp"

namespace endo {

namespace detail {

json to_json(const EncoderConfig& c) {
    return {{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"d_model", c.d_model}, {"layers", c.layers},
            {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},   {"final_norm", c.final_norm}};
}

json to_json(const DecoderConfig& c) {
    return {{"layers", c.layers},           {"heads", c.heads},           {"d_model", c.d_model},
            {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size}, {"mlp_ratio", c.mlp_ratio},
            {"context_dim", c.context_dim}};
}

json to_json(const ModelConfig& c) {
    return {{"encoder", to_json(c.encoder)}, {"decoder", to_json(c.decoder)}, {"max_images", c.max_images}};
}

void from_json_checked(const json& j, EncoderConfig& c) {
    reject_unknown(j, {"image_size", "patch_size", "d_model", "layers", "heads", "mlp_ratio", "final_norm"}, "encoder");
    read_opt(j, "image_size", c.image_size);
    read_opt(j, "patch_size", c.patch_size);
    read_opt(j, "d_model", c.d_model);
    read_opt(j, "layers", c.layers);
    read_opt(j, "heads", c.heads);
    read_opt(j, "mlp_ratio", c.mlp_ratio);
    read_opt(j, "final_norm", c.final_norm);
}

void from_json_checked(const json& j, DecoderConfig& c) {
    reject_unknown(j, {"layers", "heads", "d_model", "max_seq_len", "vocab_size", "mlp_ratio", "context_dim"},
                   "decoder");
    read_opt(j, "layers", c.layers);
    read_opt(j, "heads", c.heads);
    read_opt(j, "d_model", c.d_model);
    read_opt(j, "max_seq_len", c.max_seq_len);
    read_opt(j, "vocab_size", c.vocab_size);
    read_opt(j, "mlp_ratio", c.mlp_ratio);
    read_opt(j, "context_dim", c.context_dim);
}

void from_json_checked(const json& j, ModelConfig& c) {
    reject_unknown(j, {"encoder", "decoder", "max_images"}, "model");
    if (j.contains("encoder")) from_json_checked(j.at("encoder"), c.encoder);
    if (j.contains("decoder")) from_json_checked(j.at("decoder"), c.decoder);
    read_opt(j, "max_images", c.max_images);
}

}  // namespace detail

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
    if (decoder.context_dim != encoder.d_model) {
        throw std::invalid_argument("model: decoder context_dim must equal encoder d_model");
    }
    if (max_images < 1 || max_images > kMaxImages) throw std::invalid_argument("model: max_images must be in [1, 12]");
}

ModelConfig ModelConfig::desk(int vocab_size) {
    ModelConfig c;
    c.decoder.vocab_size = vocab_size;
    return c;
}

ModelConfig ModelConfig::tiny(int vocab_size) {
    ModelConfig c;
    c.encoder = {32, 16, 32, 2, 2, 4, true};
    c.decoder.layers = 2;
    c.decoder.heads = 2;
    c.decoder.d_model = 32;
    c.decoder.context_dim = 32;
    c.decoder.max_seq_len = 16;
    c.decoder.vocab_size = vocab_size;
    return c;
}

std::string model_config_to_json(const ModelConfig& cfg) { return detail::to_json(cfg).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
    ModelConfig c;
    detail::from_json_checked(detail::json::parse(text), c);
    return c;
}

template <typename T>
Model<T> Model<T>::shell(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    add_encoder_params(m.params, cfg.encoder);
    add_decoder_params(m.params, cfg.decoder);
    add_fusion_params(m.params, cfg.encoder.d_model, cfg.max_images);
    return m;
}

template <typename T>
Model<T> Model<T>::create(const ModelConfig& cfg, std::uint64_t seed) {
    Model m = shell(cfg);
    for (const char* prefix : {"enc.", "dec.", "fuse."}) {
        Rng rng(derive_seed(seed, std::string_view(prefix)));
        init_params(m.params, prefix, rng);
    }
    return m;
}

template <typename T>
void Model<T>::check() const {
    check_encoder_params(params, cfg.encoder);
    check_decoder_params(params, cfg.decoder);
    const auto& t = params.at(kTemporalParam).value;
    if (t.shape() != Shape{std::size_t(cfg.max_images), std::size_t(cfg.encoder.d_model)}) {
        throw std::invalid_argument(std::string("parameter '") + kTemporalParam + "' has shape " + shape_str(t.shape()));
    }
}

TeacherForcing teacher_forcing(std::span<const int> text_ids, int max_seq_len, int bos, int eos) {
    if (text_ids.size() + 1 > static_cast<std::size_t>(max_seq_len)) {
        throw std::invalid_argument("text of " + std::to_string(text_ids.size()) + " tokens exceeds max_seq_len " +
                                    std::to_string(max_seq_len) + " (one slot is reserved for BOS/EOS)");
    }
    TeacherForcing tf;
    tf.input.reserve(text_ids.size() + 1);
    tf.input.push_back(bos);
    tf.input.insert(tf.input.end(), text_ids.begin(), text_ids.end());
    tf.target.assign(text_ids.begin(), text_ids.end());
    tf.target.push_back(eos);
    return tf;
}

template <typename T>
T lm_loss(const Tensor<T>& logits, std::span<const int> targets) {
    if (logits.rows() != targets.size()) {
        throw std::invalid_argument("lm_loss: " + std::to_string(logits.rows()) + " logit rows for " +
                                    std::to_string(targets.size()) + " targets");
    }
    return cross_entropy(logits, targets);
}

template <typename T>
typename Graph<T>::Id caption_loss(ParamScope<T>& scope, const ModelConfig& cfg, const ImageTensor<T>& image,
                                   const TeacherForcing& tf) {
    auto& g = scope.graph();
    const auto z = encode_image(scope, image, cfg.encoder);
    const std::vector<std::uint8_t> valid(g.value(z).rows(), 1);
    const auto logits = decoder_forward(scope, tf.input, z, valid, cfg.decoder);
    return g.cross_entropy(logits, tf.target);
}

template <typename T>
typename Graph<T>::Id findings_loss(ParamScope<T>& scope, const ModelConfig& cfg,
                                    std::span<const ImageTensor<T>* const> images, const TeacherForcing& tf,
                                    const Tensor<T>* dummy_fill) {
    auto& g = scope.graph();
    std::vector<typename Graph<T>::Id> zs;
    zs.reserve(images.size());
    if (images.size() > static_cast<std::size_t>(cfg.max_images)) {
        throw std::invalid_argument("procedure with " + std::to_string(images.size()) +
                                    " images exceeds max_images; filter it before training");
    }
    for (const auto* img : images) zs.push_back(encode_image(scope, *img, cfg.encoder));
    std::vector<std::uint8_t> valid;
    const auto memory = assemble_context<T>(scope, zs, cfg.max_images, valid, dummy_fill);
    const auto logits = decoder_forward(scope, tf.input, memory, valid, cfg.decoder);
    return g.cross_entropy(logits, tf.target);
}

template <typename T>
FusedContext<T> caption_context(const Model<T>& model, const ImageTensor<T>& image) {
    return single_image_context(encode_image(image, model.params, model.cfg.encoder));
}

template <typename T>
FusedContext<T> findings_context(const Model<T>& model, std::span<const ImageTensor<T>* const> images) {
    std::vector<PatchEmbeddings<T>> zs;
    zs.reserve(images.size());
    for (const auto* img : images) zs.push_back(encode_image(*img, model.params, model.cfg.encoder));
    const TemporalEmbedding<T> temporal{model.params.at(kTemporalParam).value};
    return assemble_context<T>(zs, temporal, model.cfg.max_images);
}

#define ENDO_INSTANTIATE(T)                                                                                          \
    template struct Model<T>;                                                                                        \
    template T lm_loss(const Tensor<T>&, std::span<const int>);                                                      \
    template Graph<T>::Id caption_loss(ParamScope<T>&, const ModelConfig&, const ImageTensor<T>&,                    \
                                       const TeacherForcing&);                                                       \
    template Graph<T>::Id findings_loss(ParamScope<T>&, const ModelConfig&, std::span<const ImageTensor<T>* const>, \
                                        const TeacherForcing&, const Tensor<T>*);                                    \
    template FusedContext<T> caption_context(const Model<T>&, const ImageTensor<T>&);                                \
    template FusedContext<T> findings_context(const Model<T>&, std::span<const ImageTensor<T>* const>);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

#include "endo/training.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "endo/numerics.hpp"
#include "json_util.hpp"

namespace endo {

void StageConfig::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (micro_batch < 1) throw std::invalid_argument("micro_batch must be at least 1");
    if (accum_steps < 1) throw std::invalid_argument("accum_steps must be at least 1");
    if (!(warmup_frac > 0 && warmup_frac < 1)) throw std::invalid_argument("warmup_frac must be in (0, 1)");
    if (!(lr_floor_frac > 0 && lr_floor_frac <= 1)) throw std::invalid_argument("lr_floor_frac must be in (0, 1]");
    if (!(peak_lr > 0)) throw std::invalid_argument("peak_lr must be positive");
    if (max_seq_len < 2) throw std::invalid_argument("max_seq_len must be at least 2");
    if (max_updates < 0 || schedule_updates < 0) throw std::invalid_argument("update limits must be non-negative");
}

StageConfig StageConfig::stage1_defaults() { return {}; }

StageConfig StageConfig::stage2_defaults() {
    StageConfig c;
    c.stage = 2;
    c.epochs = 30;
    c.micro_batch = 1;
    c.max_seq_len = 256;
    return c;
}

std::string stage_config_to_json(const StageConfig& c) {
    const detail::json j = {{"stage", c.stage},
                            {"epochs", c.epochs},
                            {"micro_batch", c.micro_batch},
                            {"accum_steps", c.accum_steps},
                            {"peak_lr", c.peak_lr},
                            {"warmup_frac", c.warmup_frac},
                            {"lr_floor_frac", c.lr_floor_frac},
                            {"seed", c.seed},
                            {"max_seq_len", c.max_seq_len},
                            {"select_best", c.select_best},
                            {"max_updates", c.max_updates},
                            {"schedule_updates", c.schedule_updates}};
    return j.dump();
}

StageConfig stage_config_from_json(std::string_view text, StageConfig c) {
    const auto j = detail::json::parse(text);
    detail::reject_unknown(j,
                           {"stage", "epochs", "micro_batch", "accum_steps", "peak_lr", "warmup_frac", "lr_floor_frac",
                            "seed", "max_seq_len", "select_best", "max_updates", "schedule_updates"},
                           "stage config");
    detail::read_opt(j, "stage", c.stage);
    detail::read_opt(j, "epochs", c.epochs);
    detail::read_opt(j, "micro_batch", c.micro_batch);
    detail::read_opt(j, "accum_steps", c.accum_steps);
    detail::read_opt(j, "peak_lr", c.peak_lr);
    detail::read_opt(j, "warmup_frac", c.warmup_frac);
    detail::read_opt(j, "lr_floor_frac", c.lr_floor_frac);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "max_seq_len", c.max_seq_len);
    detail::read_opt(j, "select_best", c.select_best);
    detail::read_opt(j, "max_updates", c.max_updates);
    detail::read_opt(j, "schedule_updates", c.schedule_updates);
    c.validate();
    return c;
}

namespace {

long updates_per_epoch(std::size_t samples, const StageConfig& cfg) {
    const auto group = static_cast<std::size_t>(cfg.micro_batch) * static_cast<std::size_t>(cfg.accum_steps);
    return static_cast<long>((samples + group - 1) / group);
}

long schedule_length(std::size_t samples, const StageConfig& cfg) {
    return cfg.schedule_updates > 0 ? cfg.schedule_updates : total_updates(samples, cfg);
}

template <typename T>
typename Graph<T>::Id sample_loss(ParamScope<T>& scope, const ModelConfig& mcfg, const Dataset<T>& data,
                                  const typename Dataset<T>::Item& item, int stage, int max_seq_len) {
    const auto tf = teacher_forcing(item.text, max_seq_len);
    if (stage == 1) {
        if (item.images.size() != 1) {
            throw std::invalid_argument("stage 1 item '" + item.id + "' must have exactly one image");
        }
        return caption_loss(scope, mcfg, data.images.at(item.images[0]), tf);
    }
    std::vector<const ImageTensor<T>*> imgs;
    imgs.reserve(item.images.size());
    for (auto idx : item.images) imgs.push_back(&data.images.at(idx));
    return findings_loss<T>(scope, mcfg, imgs, tf);
}

template <typename T>
void scale_grads(ParamStore<T>& ps, T s) {
    for (auto& [name, p] : ps.entries())
        for (auto& g : p.grad.span()) g *= s;
}

}  // namespace

long total_updates(std::size_t samples, const StageConfig& cfg) {
    return static_cast<long>(cfg.epochs) * updates_per_epoch(samples, cfg);
}

double lr_at(long step, long total_steps, const StageConfig& cfg) {
    if (total_steps < 1 || step < 0 || step >= total_steps) {
        throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) +
                                ")");
    }
    const double peak = cfg.peak_lr;
    const long warmup = static_cast<long>(std::ceil(cfg.warmup_frac * static_cast<double>(total_steps)));
    if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double floor = cfg.lr_floor_frac * peak;
    // Cosine from the first post-warmup step (peak) to the last step (floor).
    const long span = total_steps - 1 - warmup;
    if (span == 0) return floor;
    const double u = static_cast<double>(step - warmup) / static_cast<double>(span);
    return floor + 0.5 * (peak - floor) * (1.0 + std::cos(M_PI * u));
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParamStore<T>& params) {
    AdamState s;
    for (const auto& [name, p] : params.entries()) {
        s.m.emplace(name, Tensor<T>(p.value.shape()));
        s.v.emplace(name, Tensor<T>(p.value.shape()));
    }
    return s;
}

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, const AdamHyper& hyper) {
    for (const auto& [name, p] : params.entries()) {
        if (!all_finite(p.grad)) throw std::domain_error("non-finite gradient in parameter '" + name + "'");
    }
    if (state.m.empty()) state = AdamState<T>::zeros_like(params);
    ++state.step;
    const T b1 = static_cast<T>(hyper.beta1), b2 = static_cast<T>(hyper.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(hyper.beta1, static_cast<double>(state.step)));
    const T bc2 = static_cast<T>(1.0 - std::pow(hyper.beta2, static_cast<double>(state.step)));
    const T step = static_cast<T>(lr), eps = static_cast<T>(hyper.eps);
    for (auto& [name, p] : params.entries()) {
        auto& m = state.m.at(name);
        auto& v = state.v.at(name);
        if (!m.same_shape(p.value)) throw std::invalid_argument("optimizer state shape mismatch for '" + name + "'");
        T* w = p.value.data();
        T* g = p.grad.data();
        T* mm = m.data();
        T* vv = v.data();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            mm[i] = b1 * mm[i] + (T(1) - b1) * g[i];
            vv[i] = b2 * vv[i] + (T(1) - b2) * g[i] * g[i];
            const T mhat = mm[i] / bc1;
            const T vhat = vv[i] / bc2;
            w[i] -= step * mhat / (std::sqrt(vhat) + eps);
            g[i] = T(0);
        }
    }
}

template <typename T>
double evaluate_loss(const Model<T>& model, const Dataset<T>& data, int stage, int max_seq_len) {
    if (data.items.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0;
    for (const auto& item : data.items) {
        Graph<T> g(false);
        ParamScope<T> scope(g, model.params);
        total += static_cast<double>(g.value(sample_loss(scope, model.cfg, data, item, stage, max_seq_len))[0]);
    }
    return total / static_cast<double>(data.items.size());
}

template <typename T>
TrainResult train_stage(Model<T>& model, const Dataset<T>& train, const std::type_identity_t<Dataset<T>>* val,
                        const StageConfig& cfg,
                        const TrainHooks<T>& hooks, TrainState<T>* resume, const ParamStore<T>* best) {
    cfg.validate();
    model.check();
    if (train.items.empty()) throw std::invalid_argument("training set is empty");
    if (cfg.max_seq_len > model.cfg.decoder.max_seq_len) {
        throw std::invalid_argument("stage max_seq_len exceeds the decoder's position table");
    }
    const std::size_t n = train.items.size();
    const std::size_t group = std::size_t(cfg.micro_batch) * std::size_t(cfg.accum_steps);
    const long per_epoch = updates_per_epoch(n, cfg);
    const long total = schedule_length(n, cfg);

    TrainState<T> local;
    TrainState<T>& state = resume ? *resume : local;
    if (state.adam.m.empty()) state.adam = AdamState<T>::zeros_like(model.params);
    auto& prog = state.progress;
    model.params.zero_grad();

    std::optional<ParamStore<T>> best_params;
    if (best) best_params = *best;

    TrainResult result;
    bool stop = false;
    for (int epoch = prog.epochs_done; epoch < cfg.epochs && !stop; ++epoch) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        const auto order = rng.permutation(n);
        double epoch_loss = 0;
        std::size_t epoch_seen = 0;
        for (long u = 0; u < per_epoch; ++u) {
            if (cfg.max_updates > 0 && prog.updates_done >= cfg.max_updates) {
                stop = true;
                break;
            }
            const std::size_t start = static_cast<std::size_t>(u) * group;
            const std::size_t end = std::min(n, start + group);
            double group_loss = 0;
            int micro_count = 0;
            for (std::size_t mb = start; mb < end; mb += std::size_t(cfg.micro_batch)) {
                const std::size_t mb_end = std::min(end, mb + std::size_t(cfg.micro_batch));
                const T seed = T(1) / static_cast<T>(mb_end - mb);
                for (std::size_t i = mb; i < mb_end; ++i) {
                    Graph<T> g(true);
                    ParamScope<T> scope(g, model.params);
                    const auto loss =
                        sample_loss(scope, model.cfg, train, train.items[order[i]], cfg.stage, cfg.max_seq_len);
                    g.backward(loss, seed);
                    group_loss += static_cast<double>(g.value(loss)[0]);
                }
                ++micro_count;
            }
            if (micro_count > 1) scale_grads(model.params, T(1) / static_cast<T>(micro_count));
            if (hooks.on_gradients) hooks.on_gradients(model.params);
            const double lr = lr_at(prog.updates_done, total, cfg);
            adam_step(model.params, state.adam, lr);
            const CurvePoint pt{prog.updates_done, epoch, lr, group_loss / static_cast<double>(end - start)};
            result.curve.push_back(pt);
            if (hooks.on_update) hooks.on_update(pt);
            epoch_loss += group_loss;
            epoch_seen += end - start;
            ++prog.updates_done;
        }
        if (epoch_seen == 0) break;

        EpochSummary summary;
        summary.epoch = epoch;
        summary.train_loss = epoch_loss / static_cast<double>(epoch_seen);
        summary.val_loss = val ? evaluate_loss(model, *val, cfg.stage, cfg.max_seq_len)
                               : std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(summary.val_loss) && (prog.best_epoch < 0 || summary.val_loss < prog.best_val)) {
            prog.best_epoch = epoch;
            prog.best_val = summary.val_loss;
            summary.best = true;
            if (cfg.select_best) best_params = model.params;
        }
        prog.epochs_done = epoch + 1;
        result.epochs.push_back(summary);
        if (hooks.on_epoch) hooks.on_epoch(summary, model, state);
    }
    if (cfg.select_best && best_params) {
        for (auto& [name, p] : model.params.entries()) p.value = best_params->at(name).value;
    }
    result.best_epoch = prog.best_epoch;
    result.updates = prog.updates_done;
    return result;
}

#define ENDO_INSTANTIATE(T)                                                                                       \
    template struct AdamState<T>;                                                                                 \
    template void adam_step(ParamStore<T>&, AdamState<T>&, double, const AdamHyper&);                             \
    template double evaluate_loss(const Model<T>&, const Dataset<T>&, int, int);                                  \
    template TrainResult train_stage(Model<T>&, const Dataset<T>&, const Dataset<T>*, const StageConfig&,         \
                                     const TrainHooks<T>&, TrainState<T>*, const ParamStore<T>*);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo

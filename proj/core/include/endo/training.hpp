#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "endo/model.hpp"

namespace endo {

struct StageConfig {
    int stage = 1;
    int epochs = 10;
    int micro_batch = 12;
    int accum_steps = 32;
    double peak_lr = 6e-4;
    double warmup_frac = 0.05;
    double lr_floor_frac = 0.10;
    std::uint64_t seed = 0;
    int max_seq_len = 64;
    // Keep the parameters of the epoch with the lowest validation loss.
    bool select_best = true;
    // Stops after this many updates when > 0. The schedule still spans the
    // full run unless schedule_updates overrides it.
    long max_updates = 0;
    long schedule_updates = 0;

    void validate() const;
    bool operator==(const StageConfig&) const = default;

    static StageConfig stage1_defaults();
    static StageConfig stage2_defaults();
};

std::string stage_config_to_json(const StageConfig& cfg);
StageConfig stage_config_from_json(std::string_view text, StageConfig defaults);

// Number of parameter updates in a full run.
long total_updates(std::size_t samples, const StageConfig& cfg);

// Linear warmup over ceil(warmup_frac * total) updates reaching peak on the
// last warmup step, then cosine decay that hits lr_floor_frac * peak exactly
// on the final step.
double lr_at(long step, long total_steps, const StageConfig& cfg);

template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m, v;
    long step = 0;

    static AdamState zeros_like(const ParamStore<T>& params);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam, no weight decay. Zeroes gradients afterwards. Throws
// std::domain_error naming the parameter if any gradient is non-finite.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, const AdamHyper& hyper = {});

// Preprocessed training data. Items refer to images by index so stage-2
// procedures can share the stage-1 image tensors.
template <typename T>
struct Dataset {
    struct Item {
        std::string id;
        std::vector<std::size_t> images;
        std::vector<int> text;  // token ids without BOS/EOS
    };
    std::vector<ImageTensor<T>> images;
    std::vector<Item> items;
};

struct CurvePoint {
    long update = 0;
    int epoch = 0;
    double lr = 0;
    double loss = 0;
};

struct EpochSummary {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;  // NaN without validation data
    bool best = false;
};

// Counters persisted in checkpoints so an interrupted run resumes exactly.
struct TrainProgress {
    int epochs_done = 0;
    long updates_done = 0;
    int best_epoch = -1;
    double best_val = 0;
};

template <typename T>
struct TrainState {
    AdamState<T> adam;
    TrainProgress progress;
};

template <typename T>
struct TrainHooks {
    // Called after each epoch with the live parameters and state.
    std::function<void(const EpochSummary&, const Model<T>&, const TrainState<T>&)> on_epoch;
    std::function<void(const CurvePoint&)> on_update;
    // Sees the averaged gradients of each update just before the optimizer step.
    std::function<void(const ParamStore<T>&)> on_gradients;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::vector<EpochSummary> epochs;
    int best_epoch = -1;
    long updates = 0;
};

// Mean per-token loss over items, without gradients.
template <typename T>
double evaluate_loss(const Model<T>& model, const Dataset<T>& data, int stage, int max_seq_len);

// Runs the accumulation loop for either stage. Micro-batch losses are means
// over their samples; an update averages the micro-batch gradients.
// `resume`, when given, continues from a saved state; `best` then carries the
// best-validation parameters found so far (if any).
template <typename T>
TrainResult train_stage(Model<T>& model, const Dataset<T>& train, const std::type_identity_t<Dataset<T>>* val, const StageConfig& cfg,
                        const TrainHooks<T>& hooks = {}, TrainState<T>* resume = nullptr,
                        const ParamStore<T>* best = nullptr);

template <typename T>
TrainResult train_stage1(Model<T>& model, const Dataset<T>& train, const std::type_identity_t<Dataset<T>>* val, const StageConfig& cfg,
                         const TrainHooks<T>& hooks = {}) {
    if (cfg.stage != 1) throw std::invalid_argument("train_stage1: config is for stage " + std::to_string(cfg.stage));
    return train_stage(model, train, val, cfg, hooks);
}

template <typename T>
TrainResult train_stage2(Model<T>& model, const Dataset<T>& train, const std::type_identity_t<Dataset<T>>* val, const StageConfig& cfg,
                         const TrainHooks<T>& hooks = {}) {
    if (cfg.stage != 2) throw std::invalid_argument("train_stage2: config is for stage " + std::to_string(cfg.stage));
    return train_stage(model, train, val, cfg, hooks);
}

}  // namespace endo

#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "oetr/loss.hpp"
#include "oetr/synth.hpp"

// Toy training loop: AdamW (decoupled weight decay) over synthetic pairs,
// per-step loss breakdown records and periodic held-out mean-IoU evaluation.
namespace oetr::train {

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 8;
    double lr = 3e-4;
    double weight_decay = 1e-4;   // decoupled
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t warmup_steps = 100;    // linear warmup, then cosine decay to lr_floor
    double lr_floor_frac = 0.1;
    double grad_clip = 5.0;            // global norm; <= 0 disables
    std::size_t eval_every = 50;
    std::size_t eval_samples = 48;
    std::uint64_t holdout_offset = 1000000;  // sample indices for held-out eval
    std::uint64_t init_seed = 1;
    double early_stop_iou = -1.0;      // stop once held-out IoU reaches this; < 0 disables
    loss::LossWeights weights{};

    void validate() const;
};

struct StepRecord {
    std::size_t step = 0;
    double lr = 0;
    loss::LossBreakdown loss;
};

struct EvalRecord {
    std::size_t step = 0;
    double mean_iou = 0;
    double median_iou = 0;
};

struct TrainResult {
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;
    double final_holdout_iou = 0;
    std::size_t steps_run = 0;
};

// AdamW state per parameter tensor.
template <typename T>
class AdamW {
public:
    AdamW(model::ParamStore<T>& params, const TrainConfig& cfg);
    // Applies one update from the accumulated (averaged) gradients.
    void step(double lr);
    double clip_global_norm(double max_norm);  // returns the pre-clip norm

private:
    model::ParamStore<T>& params_;
    TrainConfig cfg_;
    std::map<std::string, Tensor<T>> m_, v_;
    std::size_t t_ = 0;
};

double lr_at(const TrainConfig& cfg, std::size_t step);

// Mean held-out IoU of predicted vs ground-truth boxes over eval samples.
template <typename T>
EvalRecord evaluate_holdout(model::ParamStore<T>& params, const model::ModelConfig& mcfg,
                            const synth::SynthConfig& scfg, std::size_t count,
                            std::uint64_t index_offset, std::size_t step = 0);

// Runs the loop. log (optional) receives one JSON line per step and per
// eval. Throws NumericalError with a diagnostic when the loss goes
// non-finite. Deterministic for fixed seeds and dtype.
template <typename T>
TrainResult train_toy(model::ParamStore<T>& params, const model::ModelConfig& mcfg,
                      const synth::SynthConfig& scfg, const TrainConfig& tcfg,
                      std::ostream* log = nullptr,
                      const std::function<void(const EvalRecord&)>& on_eval = nullptr);

}  // namespace oetr::train

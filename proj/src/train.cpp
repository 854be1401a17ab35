#include "oetr/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "oetr/ops.hpp"

namespace oetr::train {

void TrainConfig::validate() const {
    if (steps < 1 || batch_size < 1) throw InvalidConfig("train: steps and batch size must be >= 1");
    if (!(lr > 0) || weight_decay < 0) throw InvalidConfig("train: bad lr or weight decay");
    if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
        throw InvalidConfig("train: betas must be in (0,1)");
    if (eval_every < 1 || eval_samples < 1) throw InvalidConfig("train: bad eval settings");
    weights.validate();
}

double lr_at(const TrainConfig& cfg, std::size_t step) {
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    const double floor = cfg.lr * cfg.lr_floor_frac;
    if (cfg.steps <= cfg.warmup_steps) return cfg.lr;
    const double t = static_cast<double>(step - cfg.warmup_steps) /
                     static_cast<double>(cfg.steps - cfg.warmup_steps);
    return floor + (cfg.lr - floor) * 0.5 * (1.0 + std::cos(M_PI * std::min(t, 1.0)));
}

template <typename T>
AdamW<T>::AdamW(model::ParamStore<T>& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    for (const auto& name : params.names()) {
        m_.emplace(name, Tensor<T>::zeros(params.at(name).value.shape));
        v_.emplace(name, Tensor<T>::zeros(params.at(name).value.shape));
    }
}

template <typename T>
double AdamW<T>::clip_global_norm(double max_norm) {
    double sq = 0;
    for (const auto& name : params_.names()) {
        const auto& g = params_.at(name).grad;
        sq += static_cast<double>(kernels::dot(g.numel(), g.data.data(), g.data.data()));
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const T f = static_cast<T>(max_norm / norm);
        for (const auto& name : params_.names()) {
            auto& g = params_.at(name).grad;
            kernels::scale(g.numel(), f, g.data.data());
        }
    }
    return norm;
}

template <typename T>
void AdamW<T>::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& name : params_.names()) {
        auto& p = params_.at(name);
        auto& m = m_.at(name);
        auto& v = v_.at(name);
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = static_cast<double>(p.grad.data[i]);
            const double mi = cfg_.beta1 * static_cast<double>(m.data[i]) + (1 - cfg_.beta1) * g;
            const double vi = cfg_.beta2 * static_cast<double>(v.data[i]) + (1 - cfg_.beta2) * g * g;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.adam_eps) +
                                  cfg_.weight_decay * static_cast<double>(p.value.data[i]);
            p.value.data[i] -= static_cast<T>(lr * update);
        }
    }
}

namespace {

loss::OverlapTarget clamp_target(const loss::OverlapTarget& t) { return t; }

template <typename T>
Tensor<T> to_dtype(const Tensor<float>& t) {
    return t.template cast<T>();
}

std::string step_json(const StepRecord& r) {
    std::ostringstream os;
    os.precision(10);
    os << "{\"type\":\"step\",\"step\":" << r.step << ",\"lr\":" << r.lr
       << ",\"total\":" << r.loss.total << ",\"a\":{\"con\":" << r.loss.a.con
       << ",\"loc\":" << r.loss.a.loc << ",\"iou\":" << r.loss.a.iou << ",\"l1\":" << r.loss.a.l1
       << "},\"b\":{\"con\":" << r.loss.b.con << ",\"loc\":" << r.loss.b.loc
       << ",\"iou\":" << r.loss.b.iou << ",\"l1\":" << r.loss.b.l1 << "}}";
    return os.str();
}

std::string eval_json(const EvalRecord& r) {
    std::ostringstream os;
    os.precision(10);
    os << "{\"type\":\"eval\",\"step\":" << r.step << ",\"mean_iou\":" << r.mean_iou
       << ",\"median_iou\":" << r.median_iou << "}";
    return os.str();
}

}  // namespace

template <typename T>
EvalRecord evaluate_holdout(model::ParamStore<T>& params, const model::ModelConfig& mcfg,
                            const synth::SynthConfig& scfg, std::size_t count,
                            std::uint64_t index_offset, std::size_t step) {
    std::vector<double> ious;
    for (std::size_t i = 0; i < count; ++i) {
        const synth::TrainSample sample = synth::generate_pair(scfg, index_offset + i);
        Graph<T> g;
        model::ModelGraph<T> m(g, params, false);
        const auto refs = model::model_forward(m, mcfg, to_dtype<T>(sample.image_a),
                                               to_dtype<T>(sample.image_b));
        const double S = static_cast<double>(scfg.output_size);
        const auto [pa, pb] = model::extract_predictions(g, refs, S, S);
        ious.push_back(geometry::iou(pa.box_px, synth::target_box_px(sample.target_a, S, S)));
        ious.push_back(geometry::iou(pb.box_px, synth::target_box_px(sample.target_b, S, S)));
    }
    EvalRecord rec;
    rec.step = step;
    rec.mean_iou = std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size());
    std::nth_element(ious.begin(), ious.begin() + static_cast<std::ptrdiff_t>(ious.size() / 2), ious.end());
    rec.median_iou = ious[ious.size() / 2];
    return rec;
}

template <typename T>
TrainResult train_toy(model::ParamStore<T>& params, const model::ModelConfig& mcfg,
                      const synth::SynthConfig& scfg, const TrainConfig& tcfg, std::ostream* log,
                      const std::function<void(const EvalRecord&)>& on_eval) {
    mcfg.validate();
    scfg.validate();
    tcfg.validate();
    AdamW<T> opt(params, tcfg);
    TrainResult result;

    for (std::size_t step = 1; step <= tcfg.steps; ++step) {
        params.zero_grads();
        loss::LossBreakdown mean_loss;
        for (std::size_t bi = 0; bi < tcfg.batch_size; ++bi) {
            const std::uint64_t index = (step - 1) * tcfg.batch_size + bi;
            const synth::TrainSample sample = synth::generate_pair(scfg, index);
            Graph<T> g;
            model::ModelGraph<T> m(g, params, true);
            const auto refs = model::model_forward(m, mcfg, to_dtype<T>(sample.image_a),
                                                   to_dtype<T>(sample.image_b));
            const auto lrefs = loss::total_loss<T>(g, refs, clamp_target(sample.target_a),
                                                   clamp_target(sample.target_b), tcfg.weights);
            const auto bd = loss::read_breakdown(g, lrefs);
            if (!std::isfinite(bd.total)) {
                std::ostringstream os;
                os << "non-finite loss at step " << step << ", sample index " << index << " (";
                os << "a: con=" << bd.a.con << " loc=" << bd.a.loc << " iou=" << bd.a.iou
                   << " l1=" << bd.a.l1 << "; b: con=" << bd.b.con << " loc=" << bd.b.loc
                   << " iou=" << bd.b.iou << " l1=" << bd.b.l1 << ")";
                throw NumericalError(os.str());
            }
            g.backward(lrefs.total);
            m.accumulate_grads();
            mean_loss.total += bd.total;
            mean_loss.a.con += bd.a.con;
            mean_loss.a.loc += bd.a.loc;
            mean_loss.a.iou += bd.a.iou;
            mean_loss.a.l1 += bd.a.l1;
            mean_loss.b.con += bd.b.con;
            mean_loss.b.loc += bd.b.loc;
            mean_loss.b.iou += bd.b.iou;
            mean_loss.b.l1 += bd.b.l1;
        }
        const double inv = 1.0 / static_cast<double>(tcfg.batch_size);
        mean_loss.total *= inv;
        mean_loss.a.con *= inv;
        mean_loss.a.loc *= inv;
        mean_loss.a.iou *= inv;
        mean_loss.a.l1 *= inv;
        mean_loss.b.con *= inv;
        mean_loss.b.loc *= inv;
        mean_loss.b.iou *= inv;
        mean_loss.b.l1 *= inv;
        for (const auto& name : params.names()) {
            auto& grad = params.at(name).grad;
            kernels::scale(grad.numel(), static_cast<T>(inv), grad.data.data());
        }

        opt.clip_global_norm(tcfg.grad_clip);
        const double lr = lr_at(tcfg, step);
        opt.step(lr);

        StepRecord rec{step, lr, mean_loss};
        result.steps.push_back(rec);
        if (log) *log << step_json(rec) << "\n";

        if (step % tcfg.eval_every == 0 || step == tcfg.steps) {
            EvalRecord ev = evaluate_holdout(params, mcfg, scfg, tcfg.eval_samples,
                                             tcfg.holdout_offset, step);
            result.evals.push_back(ev);
            result.final_holdout_iou = ev.mean_iou;
            if (log) *log << eval_json(ev) << "\n";
            if (on_eval) on_eval(ev);
            if (tcfg.early_stop_iou > 0 && ev.mean_iou >= tcfg.early_stop_iou) {
                result.steps_run = step;
                return result;
            }
        }
        result.steps_run = step;
    }
    return result;
}

template class AdamW<float>;
template class AdamW<double>;
template EvalRecord evaluate_holdout<float>(model::ParamStore<float>&, const model::ModelConfig&, const synth::SynthConfig&, std::size_t, std::uint64_t, std::size_t);
template EvalRecord evaluate_holdout<double>(model::ParamStore<double>&, const model::ModelConfig&, const synth::SynthConfig&, std::size_t, std::uint64_t, std::size_t);
template TrainResult train_toy<float>(model::ParamStore<float>&, const model::ModelConfig&, const synth::SynthConfig&, const TrainConfig&, std::ostream*, const std::function<void(const EvalRecord&)>&);
template TrainResult train_toy<double>(model::ParamStore<double>&, const model::ModelConfig&, const synth::SynthConfig&, const TrainConfig&, std::ostream*, const std::function<void(const EvalRecord&)>&);

}  // namespace oetr::train

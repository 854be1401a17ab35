#include "oetr/loss.hpp"

#include "oetr/ops.hpp"

namespace oetr::loss {

namespace {

template <typename T>
struct Corners {
    Value x0, y0, x1, y1, w, h;
};

template <typename T>
Corners<T> corners_of(Graph<T>& g, Value cxcywh) {
    Value cx = ops::pick(g, cxcywh, 0);
    Value cy = ops::pick(g, cxcywh, 1);
    Value w = ops::pick(g, cxcywh, 2);
    Value h = ops::pick(g, cxcywh, 3);
    Value hw = ops::affine(g, w, T(0.5));
    Value hh = ops::affine(g, h, T(0.5));
    return {ops::sub(g, cx, hw), ops::sub(g, cy, hh), ops::add(g, cx, hw), ops::add(g, cy, hh),
            w, h};
}

template <typename T>
Value l1_to_const(Graph<T>& g, Tensor<T> target, Value pred) {
    return ops::sum(g, ops::abs_val(g, ops::sub(g, g.constant(std::move(target)), pred)));
}

}  // namespace

template <typename T>
Value giou_cxcywh(Graph<T>& g, Value box_a, Value box_b) {
    if (g.value(box_a).numel() != 4 || g.value(box_b).numel() != 4)
        throw InvalidShape("giou_cxcywh: boxes must be 4-vectors");
    Corners<T> a = corners_of<T>(g, box_a);
    Corners<T> b = corners_of<T>(g, box_b);
    // relu keeps the one-sided subgradient at touching corners
    Value iw = ops::relu(g, ops::sub(g, ops::vmin(g, a.x1, b.x1), ops::vmax(g, a.x0, b.x0)));
    Value ih = ops::relu(g, ops::sub(g, ops::vmin(g, a.y1, b.y1), ops::vmax(g, a.y0, b.y0)));
    Value inter = ops::mul(g, iw, ih);
    Value area = ops::add(g, ops::mul(g, a.w, a.h), ops::mul(g, b.w, b.h));
    Value uni = ops::sub(g, area, inter);
    Value ew = ops::sub(g, ops::vmax(g, a.x1, b.x1), ops::vmin(g, a.x0, b.x0));
    Value eh = ops::sub(g, ops::vmax(g, a.y1, b.y1), ops::vmin(g, a.y0, b.y0));
    Value enclosure = ops::mul(g, ew, eh);
    return ops::sub(g, ops::divide(g, inter, uni),
                    ops::divide(g, ops::sub(g, enclosure, uni), enclosure));
}

template <typename T>
LossRefs total_loss(Graph<T>& g, const model::ForwardRefs& refs, const OverlapTarget& target_a,
                    const OverlapTarget& target_b, const LossWeights& weights) {
    weights.validate();
    target_a.validate();
    target_b.validate();

    auto per_image = [&](const model::ImageRefs& ir, const OverlapTarget& tgt) {
        Tensor<T> center({2}, {static_cast<T>(tgt.cx), static_cast<T>(tgt.cy)});
        Tensor<T> box({4}, {static_cast<T>(tgt.cx), static_cast<T>(tgt.cy), static_cast<T>(tgt.w),
                            static_cast<T>(tgt.h)});
        Value pred_center = ops::pack(g, std::vector<Value>{ir.head.center_x, ir.head.center_y});
        Value cons_center = ops::pack(
            g, std::vector<Value>{ir.consistency.center_x, ir.consistency.center_y});

        TermRefs t;
        t.con = ops::affine(g, l1_to_const(g, center, cons_center), static_cast<T>(weights.con));
        t.loc = ops::affine(g, l1_to_const(g, center, pred_center), static_cast<T>(weights.loc));
        Value giou_v = giou_cxcywh<T>(g, g.constant(box), ir.box_cxcywh);
        t.iou = ops::affine(g, giou_v, static_cast<T>(-weights.iou), static_cast<T>(weights.iou));
        t.l1 = ops::affine(g, l1_to_const(g, box, ir.box_cxcywh), static_cast<T>(weights.l1));
        return t;
    };

    LossRefs out;
    out.a = per_image(refs.a, target_a);
    out.b = per_image(refs.b, target_b);
    Value sum_a = ops::add(g, ops::add(g, out.a.con, out.a.loc), ops::add(g, out.a.iou, out.a.l1));
    Value sum_b = ops::add(g, ops::add(g, out.b.con, out.b.loc), ops::add(g, out.b.iou, out.b.l1));
    out.total = ops::add(g, sum_a, sum_b);
    return out;
}

template <typename T>
LossBreakdown read_breakdown(Graph<T>& g, const LossRefs& refs) {
    LossBreakdown b;
    auto read = [&](Value v) { return static_cast<double>(g.value(v).data[0]); };
    b.total = read(refs.total);
    b.a = {read(refs.a.con), read(refs.a.loc), read(refs.a.iou), read(refs.a.l1)};
    b.b = {read(refs.b.con), read(refs.b.loc), read(refs.b.iou), read(refs.b.l1)};
    return b;
}

gradcheck::Report e2e_loss_grad_check(std::size_t image_size, int coords_per_param,
                                      std::uint64_t seed) {
    const model::ModelConfig cfg = model::ModelConfig::tiny();
    model::ParamStore<double> store = model::init_params<double>(cfg, seed);
    Rng rng(seed + 1);
    const Tensor<double> image_a = rng.uniform_tensor<double>({3, image_size, image_size});
    const Tensor<double> image_b = rng.uniform_tensor<double>({3, image_size, image_size});
    const OverlapTarget ta{0.45, 0.55, 0.4, 0.5};
    const OverlapTarget tb{0.6, 0.4, 0.3, 0.35};

    const std::vector<std::string> names = store.names();
    std::vector<Tensor<double>> inputs;
    for (const auto& n : names) inputs.push_back(store.at(n).value);

    auto build = [&](Graph<double>& g, const std::vector<Value>& leaves) {
        model::ModelGraph<double> m(g, store, true);
        for (std::size_t i = 0; i < names.size(); ++i) m.bind(names[i], leaves[i]);
        auto refs = model::model_forward(m, cfg, image_a, image_b);
        auto lr = total_loss<double>(g, refs, ta, tb, LossWeights{});
        return lr.total;
    };
    return gradcheck::check("loss_e2e", build, std::move(inputs), 1e-4, 1e-5, coords_per_param,
                            seed + 2);
}

template Value giou_cxcywh<float>(Graph<float>&, Value, Value);
template Value giou_cxcywh<double>(Graph<double>&, Value, Value);
template LossRefs total_loss<float>(Graph<float>&, const model::ForwardRefs&, const OverlapTarget&, const OverlapTarget&, const LossWeights&);
template LossRefs total_loss<double>(Graph<double>&, const model::ForwardRefs&, const OverlapTarget&, const OverlapTarget&, const LossWeights&);
template LossBreakdown read_breakdown<float>(Graph<float>&, const LossRefs&);
template LossBreakdown read_breakdown<double>(Graph<double>&, const LossRefs&);

}  // namespace oetr::loss

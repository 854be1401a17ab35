#include "oetr/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "oetr/image.hpp"

namespace oetr::pipeline {

ResizePadResult resize_pad(const Tensor<float>& image, std::size_t target_long_side,
                           std::size_t pad_multiple) {
    if (image.rank() != 3 || image.shape[1] == 0 || image.shape[2] == 0)
        throw InvalidInput("resize_pad: empty image");
    if (target_long_side == 0 || pad_multiple == 0)
        throw InvalidInput("resize_pad: target and multiple must be positive");
    const std::size_t C = image.shape[0], H = image.shape[1], W = image.shape[2];
    const double r = static_cast<double>(target_long_side) / static_cast<double>(std::max(H, W));
    const auto rw = static_cast<std::size_t>(std::lround(static_cast<double>(W) * r));
    const auto rh = static_cast<std::size_t>(std::lround(static_cast<double>(H) * r));

    const std::size_t longer = std::max(rw, rh);
    const std::size_t padded = ((longer + pad_multiple - 1) / pad_multiple) * pad_multiple;

    Tensor<float> resized =
        (rw == W && rh == H) ? image : img::resize_bilinear(image, static_cast<int>(rw), static_cast<int>(rh));
    Tensor<float> out({C, padded, padded});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < rh; ++y)
            std::copy_n(resized.data.begin() + static_cast<std::ptrdiff_t>((c * rh + y) * rw), rw,
                        out.data.begin() + static_cast<std::ptrdiff_t>((c * padded + y) * padded));

    ResizePadResult res;
    res.image = std::move(out);
    res.transform.resize_ratio = r;  // padding sits right/bottom: no offset
    res.valid_w = rw;
    res.valid_h = rh;
    return res;
}

EstimateResult estimate_overlap(const Tensor<float>& image_a, const Tensor<float>& image_b,
                                model::ParamStore<float>& params, const model::ModelConfig& cfg,
                                const model::CheckpointMeta& meta) {
    const Tensor<float> rgb_a = img::ensure_rgb(image_a);
    const Tensor<float> rgb_b = img::ensure_rgb(image_b);
    ResizePadResult pa = resize_pad(rgb_a, meta.input_long_side, meta.pad_multiple);
    ResizePadResult pb = resize_pad(rgb_b, meta.input_long_side, meta.pad_multiple);
    if (pa.image.shape != pb.image.shape) {
        // both are square multiples of pad_multiple; pad the smaller up
        const std::size_t target = std::max(pa.image.shape[1], pb.image.shape[1]);
        auto grow = [&](ResizePadResult& p) {
            if (p.image.shape[1] == target) return;
            Tensor<float> big({3, target, target});
            const std::size_t old = p.image.shape[1];
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < old; ++y)
                    std::copy_n(p.image.data.begin() + static_cast<std::ptrdiff_t>((c * old + y) * old),
                                old,
                                big.data.begin() + static_cast<std::ptrdiff_t>((c * target + y) * target));
            p.image = std::move(big);
        };
        grow(pa);
        grow(pb);
    }

    const std::size_t P = pa.image.shape[1];
    const Tensor<float> mask_a = model::feature_mask<float>(cfg, P, P, pa.valid_h, pa.valid_w);
    const Tensor<float> mask_b = model::feature_mask<float>(cfg, P, P, pb.valid_h, pb.valid_w);

    Graph<float> g;
    model::ModelGraph<float> m(g, params, false);
    const auto refs = model::model_forward(m, cfg, pa.image, pb.image, &mask_a, &mask_b);
    auto [pred_a, pred_b] =
        model::extract_predictions(g, refs, static_cast<double>(P), static_cast<double>(P));

    auto to_original = [](const geometry::OverlapBox& box, const ImageTransform& t,
                          const Tensor<float>& orig) {
        const auto lo = t.inverse({box.x_min, box.y_min});
        const auto hi = t.inverse({box.x_max, box.y_max});
        geometry::OverlapBox out{lo[0], lo[1], hi[0], hi[1]};
        return out.clamped(static_cast<double>(orig.shape[2]), static_cast<double>(orig.shape[1]));
    };

    EstimateResult res;
    res.pred_a = pred_a;
    res.pred_b = pred_b;
    res.box_a = to_original(pred_a.box_px, pa.transform, rgb_a);
    res.box_b = to_original(pred_b.box_px, pb.transform, rgb_b);
    return res;
}

CropAlignResult crop_and_align(const Tensor<float>& image_a, const Tensor<float>& image_b,
                               const geometry::OverlapBox& box_a, const geometry::OverlapBox& box_b,
                               std::size_t target_long_side) {
    if (!box_a.valid()) throw InvalidInput("crop_and_align: degenerate box for image A");
    if (!box_b.valid()) throw InvalidInput("crop_and_align: degenerate box for image B");
    if (target_long_side == 0) throw InvalidInput("crop_and_align: zero target size");

    const double s = geometry::overlap_scale_ratio(box_a, box_b);
    // the larger-resolution view keeps relative scale 1; the other is
    // upsampled by s to align the pair
    const bool a_larger = box_a.area() >= box_b.area();
    const double rel_a = a_larger ? 1.0 : s;
    const double rel_b = a_larger ? s : 1.0;
    const double max_side = std::max({box_a.width() * rel_a, box_a.height() * rel_a,
                                      box_b.width() * rel_b, box_b.height() * rel_b});
    const double base = static_cast<double>(target_long_side) / max_side;
    const double ratio_a = rel_a * base;
    const double ratio_b = rel_b * base;

    auto crop_one = [](const Tensor<float>& image, const geometry::OverlapBox& box, double ratio) {
        const int out_w = std::max(1, static_cast<int>(std::lround(box.width() * ratio)));
        const int out_h = std::max(1, static_cast<int>(std::lround(box.height() * ratio)));
        Tensor<float> crop = img::crop_resample(image, box.x_min, box.y_min, box.width(),
                                                box.height(), out_w, out_h);
        ImageTransform t;
        t.crop_x = box.x_min;
        t.crop_y = box.y_min;
        t.crop_ratio = ratio;
        return std::pair<Tensor<float>, ImageTransform>{std::move(crop), t};
    };

    CropAlignResult res;
    res.scale_ratio = s;
    auto [ca, ta] = crop_one(image_a, box_a, ratio_a);
    auto [cb, tb] = crop_one(image_b, box_b, ratio_b);
    res.crop_a = std::move(ca);
    res.crop_b = std::move(cb);
    res.transform_a = ta;
    res.transform_b = tb;
    return res;
}

WarpBackResult warp_back(const schemas::MatchRecord& matches,
                         const schemas::TransformPairRecord& transforms) {
    transforms.a.validate();
    transforms.b.validate();
    WarpBackResult res;
    res.record = matches;
    std::vector<bool> kp_ok_a(matches.keypoints_a.size(), true);
    std::vector<bool> kp_ok_b(matches.keypoints_b.size(), true);

    // out-of-crop points are flagged, not dropped, so looser upstream
    // records still round trip; skip the strict bound validation here
    auto map_side = [&](std::vector<schemas::Keypoint>& kpts, const ImageTransform& t, int w,
                        int h, std::vector<bool>& ok) {
        for (std::size_t i = 0; i < kpts.size(); ++i) {
            if (kpts[i].x < 0 || kpts[i].x > w || kpts[i].y < 0 || kpts[i].y > h) ok[i] = false;
            const auto p = t.inverse({kpts[i].x, kpts[i].y});
            kpts[i].x = p[0];
            kpts[i].y = p[1];
        }
    };
    map_side(res.record.keypoints_a, transforms.a, matches.width_a, matches.height_a, kp_ok_a);
    map_side(res.record.keypoints_b, transforms.b, matches.width_b, matches.height_b, kp_ok_b);

    // declared sizes become the original images when the record carries them;
    // otherwise fall back to the inverse-mapped crop corner
    auto back_size = [](const ImageTransform& t, int w, int h, int known_w, int known_h,
                        int& out_w, int& out_h) {
        if (known_w > 0 && known_h > 0) {
            out_w = known_w;
            out_h = known_h;
            return;
        }
        const auto corner = t.inverse({static_cast<double>(w), static_cast<double>(h)});
        out_w = static_cast<int>(std::ceil(corner[0]));
        out_h = static_cast<int>(std::ceil(corner[1]));
    };
    back_size(transforms.a, matches.width_a, matches.height_a, transforms.orig_width_a,
              transforms.orig_height_a, res.record.width_a, res.record.height_a);
    back_size(transforms.b, matches.width_b, matches.height_b, transforms.orig_width_b,
              transforms.orig_height_b, res.record.width_b, res.record.height_b);

    res.record.match_valid.assign(res.record.matches.size(), true);
    for (std::size_t i = 0; i < res.record.matches.size(); ++i) {
        const bool was_valid = matches.match_valid.empty() || matches.match_valid[i];
        const auto [ia, ib] = res.record.matches[i];
        const bool ok = was_valid && kp_ok_a[static_cast<std::size_t>(ia)] && kp_ok_b[static_cast<std::size_t>(ib)];
        res.record.match_valid[i] = ok;
        if (!ok) ++res.flagged;
    }
    return res;
}

}  // namespace oetr::pipeline

#pragma once

#include <array>

#include "oetr/gradcheck.hpp"
#include "oetr/model.hpp"

// The composite training objective: symmetric center consistency, center
// localization, GIoU and L1 box terms, summed over both images with fixed
// weights. All centers and boxes live in normalized [0,1] coordinates.
namespace oetr::loss {

struct LossWeights {
    double con = 1.0;
    double loc = 1.0;
    double iou = 0.5;
    double l1 = 0.5;

    void validate() const {
        if (con < 0 || loc < 0 || iou < 0 || l1 < 0)
            throw InvalidConfig("loss weights must be non-negative");
    }
};

// Ground truth for one image: box as (center-x, center-y, width, height)
// relative to the image size. The box's geometric center doubles as the
// center target.
struct OverlapTarget {
    double cx = 0.5, cy = 0.5, w = 1.0, h = 1.0;

    void validate() const {
        if (!(cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1 && w > 0 && w <= 1 && h > 0 && h <= 1))
            throw InvalidInput("overlap target outside [0,1]");
    }
    std::array<double, 4> cxcywh() const { return {cx, cy, w, h}; }
};

// Weighted sub-losses for one image (already scaled by their weights).
struct TermRefs {
    Value con, loc, iou, l1;
};

struct LossRefs {
    Value total;
    TermRefs a, b;
};

// Runtime view of the breakdown.
struct LossBreakdown {
    double total = 0;
    struct PerImage {
        double con = 0, loc = 0, iou = 0, l1 = 0;
    } a, b;
};

// Differentiable GIoU between two normalized cxcywh boxes (graph values of
// shape [4]); kinks carry one-sided subgradients via relu/min/max.
template <typename T>
Value giou_cxcywh(Graph<T>& g, Value box_a, Value box_b);

// Builds Eq-style total = sum over images of
//   w.con*|c - c~|_1 + w.loc*|c - c^|_1 + w.iou*(1 - GIoU(b, b^)) + w.l1*|b - b^|_1
template <typename T>
LossRefs total_loss(Graph<T>& g, const model::ForwardRefs& refs, const OverlapTarget& target_a,
                    const OverlapTarget& target_b, const LossWeights& weights = {});

template <typename T>
LossBreakdown read_breakdown(Graph<T>& g, const LossRefs& refs);

// End-to-end gradient check of the full objective on a 2-image pair with a
// tiny config; samples coords_per_param coordinates per parameter tensor.
gradcheck::Report e2e_loss_grad_check(std::size_t image_size = 32, int coords_per_param = 8,
                                      std::uint64_t seed = 99);

}  // namespace oetr::loss

#pragma once

#include <optional>
#include <string>

#include "oetr/geometry.hpp"
#include "oetr/model.hpp"
#include "oetr/schemas.hpp"
#include "oetr/transform.hpp"

// The three-stage preprocessing pipeline around the model: resize/pad to the
// model input, overlap inference mapped back to original pixels, crop-and-
// align of the overlap regions to a common scale, and exact warp-back of
// keypoints and matches.
namespace oetr::pipeline {

struct ResizePadResult {
    Tensor<float> image;  // [C, P, P] square, zero padding right/bottom
    ImageTransform transform;
    std::size_t valid_w = 0, valid_h = 0;  // resized content extent inside the padding
};

// Isotropic resize so max(H,W) == target_long_side, then zero-pad right and
// bottom so both sides reach the next multiple of pad_multiple of the longer
// resized side (a square).
ResizePadResult resize_pad(const Tensor<float>& image, std::size_t target_long_side,
                           std::size_t pad_multiple);

struct EstimateResult {
    geometry::OverlapBox box_a;  // original-image pixels
    geometry::OverlapBox box_b;
    model::OverlapPrediction pred_a;  // model-space diagnostics
    model::OverlapPrediction pred_b;
};

// Runs resize_pad on both images, the model forward pass, and maps the
// predicted boxes back through the transform inverses.
EstimateResult estimate_overlap(const Tensor<float>& image_a, const Tensor<float>& image_b,
                                model::ParamStore<float>& params, const model::ModelConfig& cfg,
                                const model::CheckpointMeta& meta);

struct CropAlignResult {
    Tensor<float> crop_a;
    Tensor<float> crop_b;
    ImageTransform transform_a;  // original pixels -> crop pixels
    ImageTransform transform_b;
    double scale_ratio = 1.0;    // Eq-style max cross-ratio of the two boxes
};

// Crops each overlap box and resizes both crops to a common scale: the
// smaller-scale crop is upsampled by the overlap scale ratio, and the pair
// is capped so the longer aligned side is target_long_side.
CropAlignResult crop_and_align(const Tensor<float>& image_a, const Tensor<float>& image_b,
                               const geometry::OverlapBox& box_a, const geometry::OverlapBox& box_b,
                               std::size_t target_long_side);

struct WarpBackResult {
    schemas::MatchRecord record;  // coordinates in original images
    std::size_t flagged = 0;      // points outside their declared crop bounds
};

// Maps keypoints (and therefore matches) from crop coordinates back to the
// original images through the transform inverses. Out-of-bounds points are
// flagged via match_valid, never dropped. Match indices are preserved.
WarpBackResult warp_back(const schemas::MatchRecord& matches,
                         const schemas::TransformPairRecord& transforms);

}  // namespace oetr::pipeline

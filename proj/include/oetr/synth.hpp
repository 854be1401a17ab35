#pragma once

#include <array>
#include <cstdint>

#include "oetr/geometry.hpp"
#include "oetr/loss.hpp"
#include "oetr/tensor.hpp"

// Synthetic training pairs: two axis-aligned crops of a procedural value-
// noise canvas with known relative scale and overlap, rendered at a fixed
// output size. Ground-truth boxes come from the crop geometry in closed
// form, independent of the depth-reprojection route in geometry.
namespace oetr::synth {

struct SynthConfig {
    int canvas_size = 256;   // coordinate window the crops are placed in
    int output_size = 64;    // rendered crop resolution (square)
    double overlap_min = 0.1, overlap_max = 0.7;  // per-image intersection/area
    double scale_min = 1.0, scale_max = 4.0;      // relative crop scale s >= 1
    double jitter = 0.0;     // perspective corner jitter, fraction of extent
    std::uint64_t seed = 7;
    int octaves = 8;

    void validate() const;
};

// Axis-aligned square crop window in canvas coordinates.
struct CropSpec {
    double x0 = 0, y0 = 0, extent = 1;
};

struct TrainSample {
    Tensor<float> image_a;  // [3,S,S]
    Tensor<float> image_b;
    loss::OverlapTarget target_a;
    loss::OverlapTarget target_b;
    // generating transform record
    CropSpec crop_a;
    CropSpec crop_b;                      // base window of B (pre-jitter)
    std::array<geometry::Vec2, 4> quad_b; // B's canvas corners after jitter
    double scale_ratio = 1;               // extent_b / extent_a or inverse, >= 1
    double overlap_a = 0, overlap_b = 0;  // achieved intersection/area per image
    std::uint64_t index = 0;
};

// Deterministic per (cfg.seed, index). Throws NumericalError when the
// overlap/scale ranges admit no sample after bounded retries.
TrainSample generate_pair(const SynthConfig& cfg, std::uint64_t index);

// The equivalent planar-scene camera model for a zero-jitter sample: both
// cameras face the canvas plane at unit depth, intrinsics encode the crop
// windows, and the relative pose is the in-plane translation between crop
// centers. compute_overlap_gt on these frames must reproduce the closed-form
// targets.
struct PlanarScene {
    geometry::CameraFrame frame_a;
    geometry::CameraFrame frame_b;
    geometry::RelativePose pose;  // A -> B
};

PlanarScene to_camera_frames(const SynthConfig& cfg, const TrainSample& sample);

// Ground-truth correspondences on a grid inside the covisible region
// (zero-jitter samples), in pixel coordinates of each crop.
geometry::MatchSet ground_truth_matches(const TrainSample& sample, int grid = 12);

// Pixel-space ground-truth boxes of a sample.
geometry::OverlapBox target_box_px(const loss::OverlapTarget& t, double img_w, double img_h);

}  // namespace oetr::synth

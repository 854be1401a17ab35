#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "oetr/errors.hpp"

// Two-view projective geometry over pinhole cameras.
//
// Pose convention (also documented in the camera interchange schema):
// RelativePose{R, t} maps A-camera coordinates to B-camera coordinates as
//   x_B = R * (x_A - t),
// i.e. t is camera B's center expressed in A's frame. Under this convention
// the essential matrix is E = R * [t]x and ground-truth correspondences
// satisfy x_B^T E x_A = 0 exactly.
namespace oetr::geometry {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

Vec3 mat3_mul_vec(const Mat3& m, const Vec3& v);
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
Mat3 mat3_transpose(const Mat3& m);
double mat3_det(const Mat3& m);
Mat3 skew(const Vec3& v);

struct CameraIntrinsics {
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;
    // pixel -> normalized camera coordinates (z = 1 implied)
    Vec2 normalize(const Vec2& px) const {
        return {(px[0] - cx) / fx, (px[1] - cy) / fy};
    }
    Vec2 project(const Vec3& p) const {  // p.z > 0 assumed
        return {fx * p[0] / p[2] + cx, fy * p[1] / p[2] + cy};
    }
    Vec3 back_project(const Vec2& px, double depth) const {
        return {(px[0] - cx) / fx * depth, (px[1] - cy) / fy * depth, depth};
    }
};

struct RelativePose {
    Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation{0, 0, 0};
    // Set by inverse() so that inverting twice reproduces the original pose
    // bit-exactly; this is what makes compute_overlap_gt's swap symmetry
    // exact rather than approximate.
    Vec3 inverse_translation_hint{0, 0, 0};
    bool has_inverse_hint = false;

    void validate(double tol = 1e-9) const;  // R^T R = I, det R = 1
    RelativePose inverse() const;            // exactly involutive
    Vec3 apply(const Vec3& x_a) const;       // x_B = R (x_A - t)
};

// Relative pose A->B from two world->camera extrinsics (x_cam = R x_world + t).
RelativePose relative_from_extrinsics(const Mat3& Ra, const Vec3& ta, const Mat3& Rb, const Vec3& tb);

struct DepthMap {
    int width = 0, height = 0;
    std::vector<double> values;       // row-major, H*W
    std::vector<std::uint8_t> valid;  // nonzero = valid

    static DepthMap constant(int w, int h, double depth);
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool is_valid(int x, int y) const {
        return valid[static_cast<std::size_t>(y) * width + x] != 0;
    }
    std::size_t valid_count() const;
    void validate() const;  // valid depths finite and > 0
};

struct CameraFrame {
    CameraIntrinsics intrinsics;
    DepthMap depth;
};

// Axis-aligned box in continuous pixel coordinates.
struct OverlapBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min < x_max && y_min < y_max; }
    OverlapBox clamped(double w, double h) const;
    // (cx, cy, w, h) normalized by the given image size
    std::array<double, 4> to_normalized(double img_w, double img_h) const;
    static OverlapBox from_normalized(const std::array<double, 4>& cxcywh, double img_w, double img_h);
};

struct PixelMatch {
    Vec2 a{0, 0};
    Vec2 b{0, 0};
    bool valid = true;
};

struct MatchSet {
    std::vector<PixelMatch> matches;
};

struct WarpResult {
    Vec2 pixel;    // in image B
    double depth;  // z in B's frame
};

// Back-project p (with depth) through Ka, map by the pose, project via Kb.
// nullopt when the point lands behind camera B or outside B's bounds.
// Throws InvalidInput on non-finite inputs.
std::optional<WarpResult> warp_pixel(const Vec2& p, double depth, const CameraIntrinsics& ka,
                                     const CameraIntrinsics& kb, const RelativePose& pose);

struct OverlapResult {
    OverlapBox box_a;
    OverlapBox box_b;
    std::size_t accepted_a = 0;  // A pixels surviving the A->B pass
    std::size_t accepted_b = 0;
    double depth_tol = 0;
};

// Depth-consistent co-visibility boxes. Each pass warps one image's valid
// pixels into the other and accepts those whose warped depth matches the
// target depth map within depth_tol (relative). A box is the union of the
// source-pixel extent bound from its own pass and the warped-point bound
// from the opposite pass, which keeps the construction exactly symmetric.
// nullopt when either pass accepts fewer than min_overlap_pixels.
std::optional<OverlapResult> compute_overlap_gt(const CameraFrame& frame_a,
                                                const CameraFrame& frame_b,
                                                const RelativePose& pose_ab,
                                                double depth_tol = 0.005,
                                                std::size_t min_overlap_pixels = 32);

double iou(const OverlapBox& a, const OverlapBox& b);
double giou(const OverlapBox& a, const OverlapBox& b);

// max(wA/wB, wB/wA, hB/hA, hA/hB) >= 1
double overlap_scale_ratio(const OverlapBox& oa, const OverlapBox& ob);

// E = R [t]x, unit Frobenius norm. Throws NumericalError when ||t|| = 0.
Mat3 essential_from_pose(const RelativePose& pose);

// Symmetric point-to-line epipolar distance in normalized camera
// coordinates (mean of the two point-line distances).
double epipolar_distance(const Mat3& essential, const Vec2& norm_a, const Vec2& norm_b);

struct MatchMetrics {
    double precision = 0;
    double matching_score = 0;
    std::size_t inliers = 0;
    std::size_t evaluated = 0;
};

MatchMetrics evaluate_matches(const MatchSet& matches, const CameraIntrinsics& ka,
                              const CameraIntrinsics& kb, const RelativePose& pose,
                              std::size_t n_kpts_a, std::size_t n_kpts_b, double threshold);

}  // namespace oetr::geometry

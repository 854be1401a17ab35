#include "oetr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oetr::geometry {

Vec3 mat3_mul_vec(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
            c[i * 3 + j] = s;
        }
    return c;
}

Mat3 mat3_transpose(const Mat3& m) {
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

double mat3_det(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 skew(const Vec3& v) {
    return {0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0};
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidInput("intrinsics: focal lengths must be positive");
    if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
        throw InvalidInput("intrinsics: principal point outside image");
    if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: non-positive image size");
}

void RelativePose::validate(double tol) const {
    const Mat3 rtr = mat3_mul(mat3_transpose(rotation), rotation);
    const Mat3 eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i)
        if (std::abs(rtr[i] - eye[i]) > tol)
            throw InvalidInput("pose: rotation is not orthonormal");
    if (std::abs(mat3_det(rotation) - 1.0) > tol)
        throw InvalidInput("pose: rotation determinant is not +1");
}

RelativePose RelativePose::inverse() const {
    // x_A = R^T x_B + t  ==  R' (x_B - t') with R' = R^T, t' = -R t
    RelativePose inv;
    inv.rotation = mat3_transpose(rotation);
    if (has_inverse_hint) {
        inv.translation = inverse_translation_hint;
    } else {
        const Vec3 rt = mat3_mul_vec(rotation, translation);
        inv.translation = {-rt[0], -rt[1], -rt[2]};
    }
    inv.inverse_translation_hint = translation;
    inv.has_inverse_hint = true;
    return inv;
}

Vec3 RelativePose::apply(const Vec3& x_a) const {
    const Vec3 d{x_a[0] - translation[0], x_a[1] - translation[1], x_a[2] - translation[2]};
    return mat3_mul_vec(rotation, d);
}

RelativePose relative_from_extrinsics(const Mat3& Ra, const Vec3& ta, const Mat3& Rb, const Vec3& tb) {
    // x_B = Rb Ra^T x_A - Rb Ra^T ta + tb = R (x_A - t), t = ta - R^T tb
    RelativePose p;
    p.rotation = mat3_mul(Rb, mat3_transpose(Ra));
    const Vec3 rt_tb = mat3_mul_vec(mat3_transpose(p.rotation), tb);
    p.translation = {ta[0] - rt_tb[0], ta[1] - rt_tb[1], ta[2] - rt_tb[2]};
    return p;
}

DepthMap DepthMap::constant(int w, int h, double depth) {
    DepthMap d;
    d.width = w;
    d.height = h;
    d.values.assign(static_cast<std::size_t>(w) * h, depth);
    d.valid.assign(static_cast<std::size_t>(w) * h, 1);
    return d;
}

std::size_t DepthMap::valid_count() const {
    return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

void DepthMap::validate() const {
    if (width <= 0 || height <= 0 ||
        values.size() != static_cast<std::size_t>(width) * height ||
        valid.size() != values.size())
        throw InvalidInput("depth map: inconsistent dimensions");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (valid[i] && (!std::isfinite(values[i]) || values[i] <= 0))
            throw InvalidInput("depth map: valid depths must be finite and positive");
}

OverlapBox OverlapBox::clamped(double w, double h) const {
    OverlapBox b;
    b.x_min = std::clamp(x_min, 0.0, w);
    b.y_min = std::clamp(y_min, 0.0, h);
    b.x_max = std::clamp(x_max, 0.0, w);
    b.y_max = std::clamp(y_max, 0.0, h);
    return b;
}

std::array<double, 4> OverlapBox::to_normalized(double img_w, double img_h) const {
    return {(x_min + x_max) / 2 / img_w, (y_min + y_max) / 2 / img_h, width() / img_w,
            height() / img_h};
}

OverlapBox OverlapBox::from_normalized(const std::array<double, 4>& b, double img_w, double img_h) {
    OverlapBox out;
    out.x_min = (b[0] - b[2] / 2) * img_w;
    out.x_max = (b[0] + b[2] / 2) * img_w;
    out.y_min = (b[1] - b[3] / 2) * img_h;
    out.y_max = (b[1] + b[3] / 2) * img_h;
    return out;
}

std::optional<WarpResult> warp_pixel(const Vec2& p, double depth, const CameraIntrinsics& ka,
                                     const CameraIntrinsics& kb, const RelativePose& pose) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(depth))
        throw InvalidInput("warp_pixel: non-finite input");
    if (!(depth > 0)) throw InvalidInput("warp_pixel: depth must be positive");
    const Vec3 x_a = ka.back_project(p, depth);
    const Vec3 x_b = pose.apply(x_a);
    if (x_b[2] <= 1e-12) return std::nullopt;  // behind (or on) camera B
    const Vec2 q = kb.project(x_b);
    if (q[0] < 0 || q[0] >= kb.width || q[1] < 0 || q[1] >= kb.height) return std::nullopt;
    return WarpResult{q, x_b[2]};
}

namespace {

struct Bound {
    double x_min = std::numeric_limits<double>::infinity();
    double y_min = std::numeric_limits<double>::infinity();
    double x_max = -std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();

    void add_point(double x, double y) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
    }
    // pixel (ix, iy) contributes its unit-square extent
    void add_pixel(int ix, int iy) {
        add_point(ix, iy);
        add_point(ix + 1.0, iy + 1.0);
    }
    void merge(const Bound& o) {
        x_min = std::min(x_min, o.x_min);
        y_min = std::min(y_min, o.y_min);
        x_max = std::max(x_max, o.x_max);
        y_max = std::max(y_max, o.y_max);
    }
    bool empty() const { return !(x_min < x_max && y_min < y_max); }
    OverlapBox box() const { return {x_min, y_min, x_max, y_max}; }
};

struct PassResult {
    Bound source;  // pixel-extent bound in the warped-from image
    Bound target;  // warped-point bound in the warped-to image
    std::size_t accepted = 0;
};

PassResult reprojection_pass(const CameraFrame& from, const CameraFrame& to,
                             const RelativePose& pose, double depth_tol) {
    PassResult r;
    for (int iy = 0; iy < from.depth.height; ++iy)
        for (int ix = 0; ix < from.depth.width; ++ix) {
            if (!from.depth.is_valid(ix, iy)) continue;
            const double d = from.depth.at(ix, iy);
            const auto warped = warp_pixel({ix + 0.5, iy + 0.5}, d, from.intrinsics,
                                           to.intrinsics, pose);
            if (!warped) continue;
            const int bx = static_cast<int>(warped->pixel[0]);
            const int by = static_cast<int>(warped->pixel[1]);
            if (!to.depth.is_valid(bx, by)) continue;
            const double target_depth = to.depth.at(bx, by);
            if (std::abs(warped->depth - target_depth) > depth_tol * target_depth) continue;
            r.source.add_pixel(ix, iy);
            r.target.add_point(warped->pixel[0], warped->pixel[1]);
            ++r.accepted;
        }
    return r;
}

}  // namespace

std::optional<OverlapResult> compute_overlap_gt(const CameraFrame& frame_a,
                                                const CameraFrame& frame_b,
                                                const RelativePose& pose_ab, double depth_tol,
                                                std::size_t min_overlap_pixels) {
    frame_a.intrinsics.validate();
    frame_b.intrinsics.validate();
    frame_a.depth.validate();
    frame_b.depth.validate();
    pose_ab.validate();
    if (frame_a.depth.valid_count() == 0 || frame_b.depth.valid_count() == 0)
        throw InvalidInput("compute_overlap_gt: depth map has no valid pixels");

    const PassResult ab = reprojection_pass(frame_a, frame_b, pose_ab, depth_tol);
    const PassResult ba = reprojection_pass(frame_b, frame_a, pose_ab.inverse(), depth_tol);
    if (ab.accepted < min_overlap_pixels || ba.accepted < min_overlap_pixels) return std::nullopt;

    Bound in_a = ab.source;
    in_a.merge(ba.target);
    Bound in_b = ba.source;
    in_b.merge(ab.target);
    if (in_a.empty() || in_b.empty()) return std::nullopt;

    OverlapResult out;
    out.box_a = in_a.box().clamped(frame_a.intrinsics.width, frame_a.intrinsics.height);
    out.box_b = in_b.box().clamped(frame_b.intrinsics.width, frame_b.intrinsics.height);
    out.accepted_a = ab.accepted;
    out.accepted_b = ba.accepted;
    out.depth_tol = depth_tol;
    return out;
}

namespace {
void require_valid_box(const OverlapBox& b, const char* op) {
    if (!b.valid()) throw InvalidInput(std::string(op) + ": degenerate box");
}
}  // namespace

double iou(const OverlapBox& a, const OverlapBox& b) {
    require_valid_box(a, "iou");
    require_valid_box(b, "iou");
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

double giou(const OverlapBox& a, const OverlapBox& b) {
    require_valid_box(a, "giou");
    require_valid_box(b, "giou");
    const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    const double ew = std::max(a.x_max, b.x_max) - std::min(a.x_min, b.x_min);
    const double eh = std::max(a.y_max, b.y_max) - std::min(a.y_min, b.y_min);
    const double enclosure = ew * eh;
    return inter / uni - (enclosure - uni) / enclosure;
}

double overlap_scale_ratio(const OverlapBox& oa, const OverlapBox& ob) {
    require_valid_box(oa, "overlap_scale_ratio");
    require_valid_box(ob, "overlap_scale_ratio");
    const double wa = oa.width(), ha = oa.height();
    const double wb = ob.width(), hb = ob.height();
    return std::max({wa / wb, wb / wa, hb / ha, ha / hb});
}

Mat3 essential_from_pose(const RelativePose& pose) {
    const Vec3& t = pose.translation;
    const double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    if (norm <= 0) throw NumericalError("essential_from_pose: degenerate pose (zero translation)");
    Mat3 e = mat3_mul(pose.rotation, skew(t));
    double fro = 0;
    for (double v : e) fro += v * v;
    fro = std::sqrt(fro);
    for (double& v : e) v /= fro;
    return e;
}

double epipolar_distance(const Mat3& e, const Vec2& na, const Vec2& nb) {
    const Vec3 xa{na[0], na[1], 1.0};
    const Vec3 xb{nb[0], nb[1], 1.0};
    const Vec3 line_b = mat3_mul_vec(e, xa);               // epipolar line of a in B
    const Vec3 line_a = mat3_mul_vec(mat3_transpose(e), xb);
    const double val = xb[0] * line_b[0] + xb[1] * line_b[1] + xb[2] * line_b[2];
    const double da = std::abs(val) / std::hypot(line_a[0], line_a[1]);
    const double db = std::abs(val) / std::hypot(line_b[0], line_b[1]);
    return 0.5 * (da + db);
}

MatchMetrics evaluate_matches(const MatchSet& matches, const CameraIntrinsics& ka,
                              const CameraIntrinsics& kb, const RelativePose& pose,
                              std::size_t n_kpts_a, std::size_t n_kpts_b, double threshold) {
    if (!(threshold > 0)) throw InvalidInput("evaluate_matches: threshold must be positive");
    const Mat3 e = essential_from_pose(pose);
    MatchMetrics m;
    for (const auto& pm : matches.matches) {
        if (!pm.valid) continue;
        ++m.evaluated;
        const double d = epipolar_distance(e, ka.normalize(pm.a), kb.normalize(pm.b));
        if (d < threshold) ++m.inliers;
    }
    if (m.evaluated > 0)
        m.precision = static_cast<double>(m.inliers) / static_cast<double>(m.evaluated);
    const std::size_t denom = std::min(n_kpts_a, n_kpts_b);
    if (denom > 0) m.matching_score = static_cast<double>(m.inliers) / static_cast<double>(denom);
    return m;
}

}  // namespace oetr::geometry

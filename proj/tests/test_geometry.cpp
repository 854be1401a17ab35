#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oetr/geometry.hpp"
#include "oetr/tensor.hpp"

using namespace oetr;
using namespace oetr::geometry;

namespace {

CameraIntrinsics simple_cam(int w, int h, double f) {
    return CameraIntrinsics{f, f, w / 2.0, h / 2.0, w, h};
}

Mat3 rot_axis_angle(const Vec3& axis_in, double angle) {
    double n = std::sqrt(axis_in[0] * axis_in[0] + axis_in[1] * axis_in[1] + axis_in[2] * axis_in[2]);
    const Vec3 u{axis_in[0] / n, axis_in[1] / n, axis_in[2] / n};
    const double c = std::cos(angle), s = std::sin(angle), ic = 1 - c;
    return {c + u[0] * u[0] * ic,        u[0] * u[1] * ic - u[2] * s, u[0] * u[2] * ic + u[1] * s,
            u[1] * u[0] * ic + u[2] * s, c + u[1] * u[1] * ic,        u[1] * u[2] * ic - u[0] * s,
            u[2] * u[0] * ic - u[1] * s, u[2] * u[1] * ic + u[0] * s, c + u[2] * u[2] * ic};
}

// Fronto-parallel plane at depth d seen by both cameras.
CameraFrame planar_frame(int w, int h, double f, double depth) {
    return CameraFrame{simple_cam(w, h, f), DepthMap::constant(w, h, depth)};
}

}  // namespace

TEST_CASE("warp_pixel identity maps a pixel to itself") {
    const auto cam = simple_cam(640, 480, 500.0);
    const auto r = warp_pixel({123.25, 47.5}, 2.0, cam, cam, RelativePose{});
    REQUIRE(r.has_value());
    CHECK(r->pixel[0] == doctest::Approx(123.25).epsilon(1e-12));
    CHECK(r->pixel[1] == doctest::Approx(47.5).epsilon(1e-12));
    CHECK(r->depth == doctest::Approx(2.0));
}

TEST_CASE("warp_pixel fronto-parallel translation shifts by -fx*tx/d") {
    const auto cam = simple_cam(640, 480, 400.0);
    const double d = 2.5, tx = 0.4;
    RelativePose pose;
    pose.translation = {tx, 0, 0};
    const auto r = warp_pixel({320.0, 240.0}, d, cam, cam, pose);
    REQUIRE(r.has_value());
    CHECK(r->pixel[0] - 320.0 == doctest::Approx(-cam.fx * tx / d).epsilon(1e-12));
    CHECK(r->pixel[1] == doctest::Approx(240.0));
}

TEST_CASE("warp_pixel rejects points behind the camera") {
    const auto cam = simple_cam(64, 64, 50.0);
    RelativePose pose;
    pose.rotation = rot_axis_angle({1, 0, 0}, M_PI);  // 180 deg about x
    CHECK_FALSE(warp_pixel({32.0, 32.0}, 1.0, cam, cam, pose).has_value());
}

TEST_CASE("warp_pixel rejects non-finite input") {
    const auto cam = simple_cam(64, 64, 50.0);
    CHECK_THROWS_AS(warp_pixel({std::nan(""), 1.0}, 1.0, cam, cam, RelativePose{}), InvalidInput);
    CHECK_THROWS_AS(warp_pixel({1.0, 1.0}, -1.0, cam, cam, RelativePose{}), InvalidInput);
}

TEST_CASE("warp round trip through the inverted pose") {
    const auto cam_a = simple_cam(640, 480, 420.0);
    const auto cam_b = simple_cam(512, 512, 380.0);
    RelativePose pose;
    pose.rotation = rot_axis_angle({0.2, 1.0, -0.4}, 0.15);
    pose.translation = {0.3, -0.1, 0.2};
    const RelativePose inv = pose.inverse();
    Rng rng(5);
    int tested = 0;
    for (int i = 0; i < 2000; ++i) {
        const Vec2 p{rng.uniform(0, 640), rng.uniform(0, 480)};
        const double d = rng.uniform(2.0, 6.0);
        const auto fwd = warp_pixel(p, d, cam_a, cam_b, pose);
        if (!fwd) continue;
        const auto back = warp_pixel(fwd->pixel, fwd->depth, cam_b, cam_a, inv);
        REQUIRE(back.has_value());
        CHECK(std::abs(back->pixel[0] - p[0]) < 1e-6);
        CHECK(std::abs(back->pixel[1] - p[1]) < 1e-6);
        ++tested;
    }
    CHECK(tested > 500);
}

TEST_CASE("pose inverse is exactly involutive") {
    RelativePose pose;
    pose.rotation = rot_axis_angle({1.0, 2.0, 3.0}, 0.7);
    pose.translation = {0.123, -4.56, 7.89};
    const RelativePose twice = pose.inverse().inverse();
    CHECK(twice.rotation == pose.rotation);
    CHECK(twice.translation == pose.translation);
}

TEST_CASE("compute_overlap_gt identity covers the full image") {
    const auto frame = planar_frame(96, 64, 80.0, 3.0);
    const auto r = compute_overlap_gt(frame, frame, RelativePose{});
    REQUIRE(r.has_value());
    CHECK(r->box_a.x_min == 0.0);
    CHECK(r->box_a.y_min == 0.0);
    CHECK(r->box_a.x_max == 96.0);
    CHECK(r->box_a.y_max == 64.0);
    CHECK(r->box_b.x_max == 96.0);
    CHECK(r->box_b.y_max == 64.0);
}

TEST_CASE("planar half-image shift matches the analytic boxes") {
    const int W = 512, H = 512;
    const double f = 256.0, d = 1.0;
    const auto fa = planar_frame(W, H, f, d);
    const auto fb = planar_frame(W, H, f, d);
    RelativePose pose;
    pose.translation = {d * (W / 2.0) / f, 0, 0};  // shift of exactly W/2 pixels
    const auto r = compute_overlap_gt(fa, fb, pose);
    REQUIRE(r.has_value());
    const OverlapBox right_half{W / 2.0, 0, double(W), double(H)};
    const OverlapBox left_half{0, 0, W / 2.0, double(H)};
    CHECK(iou(r->box_a, right_half) >= 0.99);
    CHECK(iou(r->box_b, left_half) >= 0.99);
}

TEST_CASE("translation beyond the field of view yields no overlap") {
    const auto fa = planar_frame(128, 128, 64.0, 1.0);
    RelativePose pose;
    pose.translation = {4.0, 0, 0};  // 256 px shift on a 128 px image
    CHECK_FALSE(compute_overlap_gt(fa, fa, pose).has_value());
}

TEST_CASE("depth inconsistency rejects the overlap") {
    const auto fa = planar_frame(64, 64, 40.0, 1.0);
    const auto fb = planar_frame(64, 64, 40.0, 2.0);  // B's stored depths disagree
    CHECK_FALSE(compute_overlap_gt(fa, fb, RelativePose{}).has_value());
}

TEST_CASE("compute_overlap_gt throws on empty depth") {
    auto fa = planar_frame(32, 32, 20.0, 1.0);
    auto fb = fa;
    std::fill(fb.depth.valid.begin(), fb.depth.valid.end(), 0);
    CHECK_THROWS_AS(compute_overlap_gt(fa, fb, RelativePose{}), InvalidInput);
}

TEST_CASE("swap plus pose inversion swaps the boxes exactly") {
    const auto fa = planar_frame(96, 96, 64.0, 2.0);
    const auto fb = planar_frame(128, 96, 80.0, 2.0);
    RelativePose pose;
    pose.rotation = rot_axis_angle({0, 1, 0}, 0.03);
    pose.translation = {0.4, 0.2, 0.0};
    const auto r1 = compute_overlap_gt(fa, fb, pose);
    const auto r2 = compute_overlap_gt(fb, fa, pose.inverse());
    REQUIRE(r1.has_value());
    REQUIRE(r2.has_value());
    CHECK(r1->box_a.x_min == r2->box_b.x_min);
    CHECK(r1->box_a.y_min == r2->box_b.y_min);
    CHECK(r1->box_a.x_max == r2->box_b.x_max);
    CHECK(r1->box_a.y_max == r2->box_b.y_max);
    CHECK(r1->box_b.x_min == r2->box_a.x_min);
    CHECK(r1->box_b.y_max == r2->box_a.y_max);
    CHECK(r1->accepted_a == r2->accepted_b);
}

TEST_CASE("iou hand values and properties") {
    const OverlapBox a{0, 0, 2, 2};
    const OverlapBox b{1, 1, 3, 3};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0));
    CHECK(iou(OverlapBox{0, 0, 1, 1}, OverlapBox{2, 2, 3, 3}) == 0.0);
    CHECK_THROWS_AS(iou(OverlapBox{0, 0, 0, 1}, a), InvalidInput);

    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        auto rand_box = [&] {
            const double x0 = rng.uniform(0, 10), y0 = rng.uniform(0, 10);
            return OverlapBox{x0, y0, x0 + rng.uniform(0.1, 5), y0 + rng.uniform(0.1, 5)};
        };
        const auto p = rand_box();
        const auto q = rand_box();
        CHECK(iou(p, q) == iou(q, p));
        CHECK(giou(p, q) == giou(q, p));
        CHECK(giou(p, q) <= iou(p, q) + 1e-15);
        CHECK(giou(p, q) > -1.0);
        CHECK(giou(p, q) <= 1.0);
    }
}

TEST_CASE("giou hand values") {
    CHECK(giou(OverlapBox{0, 0, 2, 2}, OverlapBox{0, 0, 2, 2}) == doctest::Approx(1.0));
    CHECK(giou(OverlapBox{0, 0, 1, 1}, OverlapBox{1, 1, 2, 2}) == doctest::Approx(-0.5));
    CHECK(giou(OverlapBox{0, 0, 2, 2}, OverlapBox{1, 1, 3, 3}) ==
          doctest::Approx(1.0 / 7.0 - 2.0 / 9.0));
    // giou == iou when the enclosure equals the union
    CHECK(giou(OverlapBox{0, 0, 1, 2}, OverlapBox{0, 1, 1, 2}) ==
          doctest::Approx(iou(OverlapBox{0, 0, 1, 2}, OverlapBox{0, 1, 1, 2})));
}

TEST_CASE("overlap_scale_ratio values and symmetry") {
    const OverlapBox a{0, 0, 100, 100};
    CHECK(overlap_scale_ratio(a, a) == doctest::Approx(1.0));
    CHECK(overlap_scale_ratio(a, OverlapBox{0, 0, 50, 50}) == doctest::Approx(2.0));
    CHECK(overlap_scale_ratio(OverlapBox{0, 0, 100, 50}, OverlapBox{0, 0, 50, 100}) ==
          doctest::Approx(2.0));
    CHECK_THROWS_AS(overlap_scale_ratio(a, OverlapBox{0, 0, 0, 10}), InvalidInput);

    Rng rng(13);
    for (int i = 0; i < 10000; ++i) {
        const OverlapBox p{0, 0, rng.uniform(1, 300), rng.uniform(1, 300)};
        const OverlapBox q{0, 0, rng.uniform(1, 300), rng.uniform(1, 300)};
        const double s = overlap_scale_ratio(p, q);
        CHECK(s == overlap_scale_ratio(q, p));
        CHECK(s >= 1.0);
    }
    // equality to 1 iff both extents match
    CHECK(overlap_scale_ratio(OverlapBox{5, 5, 15, 25}, OverlapBox{0, 0, 10, 20}) == 1.0);
}

TEST_CASE("essential matrix from pure translation") {
    RelativePose pose;
    pose.translation = {1, 0, 0};
    const Mat3 e = essential_from_pose(pose);
    const double s = 1.0 / std::sqrt(2.0);  // unit Frobenius norm
    const Mat3 expect{0, 0, 0, 0, 0, -s, 0, s, 0};
    for (int i = 0; i < 9; ++i) CHECK(e[i] == doctest::Approx(expect[i]).epsilon(1e-12));

    // scaling t leaves the normalized E unchanged
    RelativePose scaled = pose;
    scaled.translation = {2, 0, 0};
    const Mat3 e2 = essential_from_pose(scaled);
    for (int i = 0; i < 9; ++i) CHECK(e[i] == doctest::Approx(e2[i]).epsilon(1e-12));

    RelativePose degenerate;
    CHECK_THROWS_AS(essential_from_pose(degenerate), NumericalError);
}

TEST_CASE("ground-truth correspondences satisfy the epipolar constraint") {
    const auto cam_a = simple_cam(640, 480, 420.0);
    const auto cam_b = simple_cam(512, 512, 380.0);
    RelativePose pose;
    pose.rotation = rot_axis_angle({-0.3, 0.8, 0.1}, 0.2);
    pose.translation = {0.25, -0.15, 0.1};
    const Mat3 e = essential_from_pose(pose);
    Rng rng(17);
    int tested = 0;
    for (int i = 0; i < 3000; ++i) {
        const Vec2 p{rng.uniform(0, 640), rng.uniform(0, 480)};
        const double d = rng.uniform(1.5, 8.0);
        const auto w = warp_pixel(p, d, cam_a, cam_b, pose);
        if (!w) continue;
        CHECK(epipolar_distance(e, cam_a.normalize(p), cam_b.normalize(w->pixel)) < 1e-9);
        ++tested;
    }
    CHECK(tested > 300);
}

TEST_CASE("evaluate_matches precision and matching score") {
    const auto cam = simple_cam(640, 480, 420.0);
    RelativePose pose;
    pose.rotation = rot_axis_angle({0.1, 1.0, 0.0}, 0.1);
    pose.translation = {0.3, 0.05, 0.0};
    Rng rng(23);

    MatchSet gt;
    while (gt.matches.size() < 400) {
        const Vec2 p{rng.uniform(0, 640), rng.uniform(0, 480)};
        const double d = rng.uniform(2.0, 6.0);
        const auto w = warp_pixel(p, d, cam, cam, pose);
        if (!w) continue;
        gt.matches.push_back({p, w->pixel, true});
    }

    const double thr = 5e-4;
    const auto perfect = evaluate_matches(gt, cam, cam, pose, 400, 500, thr);
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.matching_score == doctest::Approx(1.0));  // inliers / min(400, 500)

    MatchSet permuted = gt;
    for (std::size_t i = 0; i < permuted.matches.size(); ++i)
        permuted.matches[i].b = gt.matches[(i + 137) % gt.matches.size()].b;
    const auto shuffled = evaluate_matches(permuted, cam, cam, pose, 400, 500, thr);
    CHECK(shuffled.precision < 0.05);

    MatchSet half = gt;
    for (std::size_t i = 0; i < half.matches.size() / 2; ++i)
        half.matches[i].b = gt.matches[(i + 137) % gt.matches.size()].b;
    const auto mixed = evaluate_matches(half, cam, cam, pose, 400, 500, thr);
    CHECK(mixed.precision == doctest::Approx(0.5).epsilon(0.1));

    const auto empty = evaluate_matches(MatchSet{}, cam, cam, pose, 100, 100, thr);
    CHECK(empty.precision == 0.0);
    CHECK(empty.matching_score == 0.0);

    MatchSet flagged = gt;
    for (auto& m : flagged.matches) m.valid = false;
    const auto none = evaluate_matches(flagged, cam, cam, pose, 100, 100, thr);
    CHECK(none.evaluated == 0);
    CHECK(none.precision == 0.0);
}

TEST_CASE("pose validation rejects non-rotations") {
    RelativePose bad;
    bad.rotation = {1, 0, 0, 0, 2, 0, 0, 0, 1};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    RelativePose reflect;
    reflect.rotation = {1, 0, 0, 0, 1, 0, 0, 0, -1};
    CHECK_THROWS_AS(reflect.validate(), InvalidInput);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "oetr/image.hpp"
#include "oetr/pipeline.hpp"
#include "oetr/schemas.hpp"

using namespace oetr;
using namespace oetr::pipeline;

namespace {

Tensor<float> noise_image(Rng& rng, int w, int h, int c = 3) {
    Tensor<float> img({static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                       static_cast<std::size_t>(w)});
    for (auto& v : img.data)
        v = std::round(static_cast<float>(rng.uniform()) * 255.0f) / 255.0f;  // 8-bit lattice
    return img;
}

// 3x3 row-major affine on homogeneous 2-vectors; the independent oracle for
// transform composition.
using Affine = std::array<double, 9>;

Affine mul(const Affine& a, const Affine& b) {
    Affine c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(i * 3 + j)] += a[static_cast<std::size_t>(i * 3 + k)] * b[static_cast<std::size_t>(k * 3 + j)];
    return c;
}

Affine scaling(double s) { return {s, 0, 0, 0, s, 0, 0, 0, 1}; }
Affine translation(double tx, double ty) { return {1, 0, tx, 0, 1, ty, 0, 0, 1}; }

std::array<double, 2> apply(const Affine& m, std::array<double, 2> p) {
    return {m[0] * p[0] + m[1] * p[1] + m[2], m[3] * p[0] + m[4] * p[1] + m[5]};
}

}  // namespace

TEST_CASE("resize_pad reproduces the reference bookkeeping") {
    Rng rng(1);
    SUBCASE("800x600 at L=1200, m=32") {
        const auto img = noise_image(rng, 800, 600);
        const auto res = resize_pad(img, 1200, 32);
        CHECK(res.transform.resize_ratio == doctest::Approx(1.5));
        CHECK(res.valid_w == 1200);
        CHECK(res.valid_h == 900);
        CHECK(res.image.shape == std::vector<std::size_t>{3, 1216, 1216});
        // padding is zero right/bottom
        CHECK(res.image.at(0, 1000, 600) == 0.0f);
        CHECK(res.transform.pad_left == 0.0);
        CHECK(res.transform.pad_top == 0.0);
    }
    SUBCASE("square image exactly at L only pads") {
        const auto img = noise_image(rng, 96, 96);
        const auto res = resize_pad(img, 96, 32);
        CHECK(res.transform.resize_ratio == 1.0);
        CHECK(res.image.shape[1] == 96);
        CHECK(res.image.at(0, 5, 7) == img.at(0, 5, 7));
    }
    SUBCASE("64x48 toy at L=64, m=32") {
        const auto img = noise_image(rng, 64, 48);
        const auto res = resize_pad(img, 64, 32);
        CHECK(res.transform.resize_ratio == 1.0);
        CHECK(res.image.shape[1] == 64);
        CHECK(res.image.shape[2] == 64);
        CHECK(res.valid_h == 48);
    }
    SUBCASE("empty image rejected") {
        Tensor<float> empty({3, 0, 4});
        CHECK_THROWS_AS(resize_pad(empty, 64, 32), InvalidInput);
    }
}

TEST_CASE("image transform round trip under 1e-6 px") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        ImageTransform tf;
        tf.resize_ratio = rng.uniform(0.2, 3.0);
        tf.pad_left = rng.uniform(0, 200);
        tf.pad_top = rng.uniform(0, 200);
        tf.crop_x = rng.uniform(0, 500);
        tf.crop_y = rng.uniform(0, 500);
        tf.crop_ratio = rng.uniform(0.25, 4.0);
        for (int i = 0; i < 500; ++i) {
            const std::array<double, 2> p{rng.uniform(0, 2000), rng.uniform(0, 2000)};
            const auto q = tf.inverse(tf.forward(p));
            CHECK(std::abs(q[0] - p[0]) < 1e-6);
            CHECK(std::abs(q[1] - p[1]) < 1e-6);
        }
    }
}

TEST_CASE("transform agrees with an independent affine composition") {
    ImageTransform tf;
    tf.resize_ratio = 1.5;
    tf.pad_left = 0;
    tf.pad_top = 158;
    tf.crop_x = 100;
    tf.crop_y = 50;
    tf.crop_ratio = 2.0;
    // forward = scale(crop_ratio) * translate(-crop) * translate(pad) * scale(r)
    const Affine oracle = mul(scaling(tf.crop_ratio),
                              mul(translation(-tf.crop_x, -tf.crop_y),
                                  mul(translation(tf.pad_left, tf.pad_top), scaling(tf.resize_ratio))));
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const std::array<double, 2> p{rng.uniform(-100, 1500), rng.uniform(-100, 1500)};
        const auto a = tf.forward(p);
        const auto b = apply(oracle, p);
        CHECK(std::abs(a[0] - b[0]) < 1e-9);
        CHECK(std::abs(a[1] - b[1]) < 1e-9);
    }
    // the worked example: crop point (40,60) back to original coordinates
    const auto p = tf.inverse({40.0, 60.0});
    CHECK(p[0] == doctest::Approx((40.0 / 2 + 100) / 1.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx((60.0 / 2 + 50 - 158) / 1.5).epsilon(1e-12));
}

TEST_CASE("crop_and_align scale arithmetic") {
    Rng rng(4);
    const auto img_a = noise_image(rng, 640, 480);
    const auto img_b = noise_image(rng, 640, 480);

    SUBCASE("equal boxes resize by the same ratio") {
        const geometry::OverlapBox box{100, 100, 300, 250};
        const auto res = crop_and_align(img_a, img_b, box, box, 400);
        CHECK(res.scale_ratio == doctest::Approx(1.0));
        CHECK(res.transform_a.crop_ratio == doctest::Approx(res.transform_b.crop_ratio));
        CHECK(res.crop_a.shape == res.crop_b.shape);
    }

    SUBCASE("200x100 vs 100x50 upsamples B by 2x relative to A") {
        const geometry::OverlapBox box_a{50, 50, 250, 150};
        const geometry::OverlapBox box_b{10, 10, 110, 60};
        const auto res = crop_and_align(img_a, img_b, box_a, box_b, 200);
        CHECK(res.scale_ratio == doctest::Approx(2.0));
        CHECK(res.transform_b.crop_ratio / res.transform_a.crop_ratio == doctest::Approx(2.0));
        // aligned crops land on the same pixel grid
        CHECK(res.crop_a.shape == res.crop_b.shape);
        CHECK(static_cast<int>(res.crop_a.shape[2]) == 200);
    }

    SUBCASE("crop aspect ratios match their boxes within a pixel") {
        for (int t = 0; t < 20; ++t) {
            const double w = rng.uniform(40, 300), h = rng.uniform(40, 300);
            const geometry::OverlapBox box_a{10, 10, 10 + w, 10 + h};
            const double s = rng.uniform(1.0, 2.5);
            const geometry::OverlapBox box_b{5, 5, 5 + w / s, 5 + h / s};
            const auto res = crop_and_align(img_a, img_b, box_a, box_b, 256);
            const double out_aspect = static_cast<double>(res.crop_a.shape[2]) /
                                      static_cast<double>(res.crop_a.shape[1]);
            const double box_aspect = box_a.width() / box_a.height();
            CHECK(std::abs(out_aspect - box_aspect) * static_cast<double>(res.crop_a.shape[1]) <
                  2.0);
        }
    }

    SUBCASE("alignment drives the rescaled scale ratio to one") {
        for (int t = 0; t < 200; ++t) {
            const double w = rng.uniform(30, 200), h = rng.uniform(30, 200);
            const double s = rng.uniform(1.0, 3.0);
            const geometry::OverlapBox box_a{0, 0, w, h};
            const geometry::OverlapBox box_b{0, 0, w / s, h / s};
            const auto res = crop_and_align(img_a, img_b, box_a, box_b, 300);
            const geometry::OverlapBox ra{0, 0, box_a.width() * res.transform_a.crop_ratio,
                                          box_a.height() * res.transform_a.crop_ratio};
            const geometry::OverlapBox rb{0, 0, box_b.width() * res.transform_b.crop_ratio,
                                          box_b.height() * res.transform_b.crop_ratio};
            CHECK(geometry::overlap_scale_ratio(ra, rb) < 1.02);
        }
    }

    SUBCASE("degenerate boxes name the offending image") {
        const geometry::OverlapBox good{0, 0, 50, 50};
        const geometry::OverlapBox degenerate{10, 10, 10, 40};
        CHECK_THROWS_WITH_AS(crop_and_align(img_a, img_b, degenerate, good, 100),
                             "crop_and_align: degenerate box for image A", InvalidInput);
        CHECK_THROWS_WITH_AS(crop_and_align(img_a, img_b, good, degenerate, 100),
                             "crop_and_align: degenerate box for image B", InvalidInput);
    }
}

TEST_CASE("warp_back inverts the preprocessing chain") {
    schemas::TransformPairRecord tp;
    tp.a.resize_ratio = 1.5;
    tp.a.crop_x = 120;
    tp.a.crop_y = 40;
    tp.a.crop_ratio = 2.0;
    tp.b.resize_ratio = 0.75;
    tp.b.crop_x = 30;
    tp.b.crop_y = 60;
    tp.b.crop_ratio = 1.25;
    tp.orig_width_a = 800;
    tp.orig_height_a = 600;
    tp.orig_width_b = 1024;
    tp.orig_height_b = 768;

    Rng rng(5);
    schemas::MatchRecord rec;
    rec.width_a = 400;
    rec.height_a = 300;
    rec.width_b = 500;
    rec.height_b = 400;
    std::vector<std::array<double, 2>> orig_a, orig_b;
    for (int i = 0; i < 5000; ++i) {
        // forward-warp original points into crop space
        const std::array<double, 2> pa{rng.uniform(100, 200), rng.uniform(40, 120)};
        const std::array<double, 2> pb{rng.uniform(80, 400), rng.uniform(100, 300)};
        const auto fa = tp.a.forward(pa);
        const auto fb = tp.b.forward(pb);
        if (fa[0] < 0 || fa[0] > rec.width_a || fa[1] < 0 || fa[1] > rec.height_a) continue;
        if (fb[0] < 0 || fb[0] > rec.width_b || fb[1] < 0 || fb[1] > rec.height_b) continue;
        orig_a.push_back(pa);
        orig_b.push_back(pb);
        rec.keypoints_a.push_back({fa[0], fa[1], 1.0});
        rec.keypoints_b.push_back({fb[0], fb[1], 1.0});
        rec.matches.emplace_back(static_cast<int>(rec.keypoints_a.size()) - 1,
                                 static_cast<int>(rec.keypoints_b.size()) - 1);
    }
    REQUIRE(orig_a.size() > 1000);

    const auto res = warp_back(rec, tp);
    CHECK(res.flagged == 0);
    CHECK(res.record.width_a == 800);
    CHECK(res.record.height_b == 768);
    CHECK(res.record.matches == rec.matches);  // indices preserved
    for (std::size_t i = 0; i < orig_a.size(); ++i) {
        CHECK(std::abs(res.record.keypoints_a[i].x - orig_a[i][0]) < 1e-6);
        CHECK(std::abs(res.record.keypoints_a[i].y - orig_a[i][1]) < 1e-6);
        CHECK(std::abs(res.record.keypoints_b[i].x - orig_b[i][0]) < 1e-6);
        CHECK(std::abs(res.record.keypoints_b[i].y - orig_b[i][1]) < 1e-6);
    }

    SUBCASE("identity transforms leave the record unchanged") {
        schemas::TransformPairRecord ident;
        ident.orig_width_a = rec.width_a;
        ident.orig_height_a = rec.height_a;
        ident.orig_width_b = rec.width_b;
        ident.orig_height_b = rec.height_b;
        const auto same = warp_back(rec, ident);
        for (std::size_t i = 0; i < rec.keypoints_a.size(); ++i) {
            CHECK(same.record.keypoints_a[i].x == rec.keypoints_a[i].x);
            CHECK(same.record.keypoints_b[i].y == rec.keypoints_b[i].y);
        }
    }

    SUBCASE("out-of-crop points are flagged, not dropped") {
        schemas::MatchRecord bad = rec;
        bad.keypoints_a[0].x = -5.0;  // outside the declared crop
        const auto flagged = warp_back(bad, tp);
        CHECK(flagged.flagged == 1);
        CHECK(flagged.record.matches.size() == bad.matches.size());
        CHECK_FALSE(flagged.record.match_valid[0]);
        CHECK(flagged.record.match_valid[1]);
    }

    SUBCASE("empty record warps to an empty record") {
        schemas::MatchRecord empty;
        empty.width_a = empty.height_a = empty.width_b = empty.height_b = 10;
        const auto out = warp_back(empty, tp);
        CHECK(out.record.matches.empty());
        CHECK(out.flagged == 0);
    }
}

TEST_CASE("ppm/pgm round trip is bit-exact") {
    Rng rng(6);
    const auto rgb = noise_image(rng, 37, 23, 3);
    const std::string bytes = img::encode_image(rgb);
    const auto decoded = img::decode_image(bytes);
    CHECK(decoded.shape == rgb.shape);
    CHECK(img::encode_image(decoded) == bytes);
    CHECK(decoded.data == rgb.data);

    const auto gray = noise_image(rng, 17, 9, 1);
    const std::string gbytes = img::encode_image(gray);
    CHECK(img::decode_image(gbytes).data == gray.data);
    CHECK(img::encode_image(img::decode_image(gbytes)) == gbytes);

    SUBCASE("rgb replication of grayscale") {
        const auto rep = img::ensure_rgb(gray);
        CHECK(rep.shape[0] == 3);
        CHECK(rep.at(0, 3, 4) == rep.at(2, 3, 4));
    }
    SUBCASE("unsupported format rejected") {
        CHECK_THROWS_AS(img::decode_image("P3\n1 1\n255\n1 2 3\n"), IoError);
    }
}

TEST_CASE("estimate_overlap with a fresh model stays in bounds and is deterministic") {
    model::ModelConfig cfg = model::ModelConfig::tiny();
    auto params = model::init_params<float>(cfg, 77);
    model::CheckpointMeta meta;
    meta.input_long_side = 64;
    meta.pad_multiple = 32;
    Rng rng(7);
    const auto img_a = noise_image(rng, 80, 52);
    const auto img_b = noise_image(rng, 64, 64);

    const auto r1 = estimate_overlap(img_a, img_b, params, cfg, meta);
    CHECK(r1.box_a.valid());
    CHECK(r1.box_a.x_min >= 0.0);
    CHECK(r1.box_a.x_max <= 80.0);
    CHECK(r1.box_a.y_max <= 52.0);
    CHECK(r1.box_b.x_max <= 64.0);

    const auto r2 = estimate_overlap(img_a, img_b, params, cfg, meta);
    CHECK(r1.box_a.x_min == r2.box_a.x_min);
    CHECK(r1.box_b.y_max == r2.box_b.y_max);
    CHECK(r1.pred_a.max_prob == r2.pred_a.max_prob);
}

TEST_CASE("schema round trips and version gating") {
    SUBCASE("camera") {
        schemas::CameraRecord cam;
        cam.intrinsics = {400, 410, 320, 240, 640, 480};
        cam.translation = {0.1, -0.2, 0.3};
        const auto text = schemas::camera_to_json(cam);
        const auto back = schemas::camera_from_json(text);
        CHECK(back.intrinsics.fx == 400);
        CHECK(back.translation[2] == 0.3);
        CHECK_THROWS_AS(schemas::camera_from_json("{\"schema_version\": 99}"), IoError);
    }
    SUBCASE("boxes") {
        schemas::BoxPairRecord rec;
        rec.box_a = {1, 2, 3, 4};
        rec.box_b = {5, 6, 7, 8};
        rec.low_confidence_b = true;
        rec.meta_json = "{\"depth_tol\": 0.005}";
        const auto back = schemas::boxes_from_json(schemas::boxes_to_json(rec));
        CHECK(back.box_a.x_max == 3);
        CHECK(back.low_confidence_b);
        CHECK(back.meta_json.find("depth_tol") != std::string::npos);
    }
    SUBCASE("transforms") {
        schemas::TransformPairRecord t;
        t.a.resize_ratio = 1.5;
        t.b.crop_ratio = 2.0;
        t.orig_width_a = 800;
        const auto back = schemas::transforms_from_json(schemas::transforms_to_json(t));
        CHECK(back.a.resize_ratio == 1.5);
        CHECK(back.b.crop_ratio == 2.0);
        CHECK(back.orig_width_a == 800);
    }
    SUBCASE("matches with descriptors payload") {
        schemas::MatchRecord rec;
        rec.width_a = rec.height_a = rec.width_b = rec.height_b = 100;
        rec.keypoints_a.push_back({1.5, 2.5, 0.9});
        rec.keypoints_b.push_back({3.5, 4.5, 0.8});
        rec.matches.emplace_back(0, 0);
        rec.descriptors_json = "{\"format\":\"opaque\",\"blob\":[1,2,3]}";
        const auto back = schemas::matches_from_json(schemas::matches_to_json(rec));
        CHECK(back.keypoints_a[0].x == 1.5);
        CHECK(back.matches[0] == std::pair<int, int>{0, 0});
        CHECK(back.descriptors_json.find("blob") != std::string::npos);
        schemas::MatchRecord bad = rec;
        bad.matches.emplace_back(5, 0);
        CHECK_THROWS_AS(schemas::matches_to_json(bad), InvalidInput);
    }
    SUBCASE("run config") {
        schemas::RunConfig cfg;
        cfg.model.d_model = 64;
        cfg.synth.output_size = 96;
        cfg.train.lr = 1e-3;
        const auto back = schemas::run_config_from_json(schemas::run_config_to_json(cfg));
        CHECK(back.model.d_model == 64);
        CHECK(back.synth.output_size == 96);
        CHECK(back.train.lr == 1e-3);
    }
}

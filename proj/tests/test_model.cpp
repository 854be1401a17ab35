#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oetr/model.hpp"
#include "oetr/ops.hpp"

using namespace oetr;
using namespace oetr::model;

namespace {

template <typename T>
Tensor<T> rand_image(Rng& rng, std::size_t size) {
    return rng.uniform_tensor<T>({3, size, size});
}

}  // namespace

TEST_CASE("config validation") {
    ModelConfig c;
    c.validate();
    SUBCASE("kernel order") {
        c.msf_kernels = {8, 4, 16};
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
    }
    SUBCASE("split sum") {
        c.msf_split = {64, 32, 16};
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
    }
    SUBCASE("iterations") {
        c.encoder_iterations = 0;
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
    }
}

TEST_CASE("backbone stride and weight sharing") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 11);
    Rng rng(12);
    const auto img = rand_image<float>(rng, 64);

    Graph<float> g;
    ModelGraph<float> m(g, params, false);
    Value a = backbone_forward(m, cfg, g.constant(img));
    CHECK(g.value(a).shape == std::vector<std::size_t>{16, 4, 4});

    // identical images give identical features through the shared weights
    Value b = backbone_forward(m, cfg, g.constant(img));
    CHECK(g.value(a).data == g.value(b).data);

    // zero image: output determined by the biases alone
    Value z1 = backbone_forward(m, cfg, g.constant(Tensor<float>::zeros({3, 64, 64})));
    const auto& zv = g.value(z1);
    for (std::size_t c = 0; c < zv.shape[0]; ++c)
        for (std::size_t i = 1; i < 16; ++i)
            CHECK(zv.data[c * 16 + i] == zv.data[c * 16]);

    CHECK_THROWS_AS(backbone_forward(m, cfg, g.constant(Tensor<float>::zeros({3, 48, 48}))),
                    InvalidShape);
}

TEST_CASE("msf grid arithmetic") {
    ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 13);
    Rng rng(14);

    SUBCASE("76x76 feature map flattens to a 38x38 grid") {
        Graph<float> g;
        ModelGraph<float> m(g, params, false);
        auto feat = rng.normal_tensor<float>({16, 76, 76});
        Value f = msf_forward(m, cfg, g.constant(feat));
        CHECK(g.value(f).shape == std::vector<std::size_t>{38 * 38, cfg.d_model});
    }

    SUBCASE("zero input leaves only the branch biases") {
        Graph<float> g;
        ModelGraph<float> m(g, params, false);
        Value f = msf_forward(m, cfg, g.constant(Tensor<float>::zeros({16, 8, 8})));
        const auto& fv = g.value(f);
        // every cell sees the identical bias row
        for (std::size_t i = 1; i < fv.shape[0]; ++i)
            for (std::size_t c = 0; c < fv.shape[1]; ++c)
                CHECK(fv.at(i, c) == fv.at(0, c));
    }

    SUBCASE("property sweep: output grid is exactly (h/2, w/2)") {
        for (std::size_t h : {8u, 10u, 16u, 30u})
            for (std::size_t w : {8u, 12u, 22u}) {
                Graph<float> g;
                ModelGraph<float> m(g, params, false);
                auto feat = rng.normal_tensor<float>({16, h, w});
                Value f = msf_forward(m, cfg, g.constant(feat));
                CHECK(g.value(f).shape[0] == (h / 2) * (w / 2));
            }
    }
}

TEST_CASE("encoder symmetry") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<double>(cfg, 15);
    Rng rng(16);
    const std::size_t gh = 3, gw = 4, n = gh * gw;
    const auto fa = rng.normal_tensor<double>({n, cfg.d_model});
    const auto fb = rng.normal_tensor<double>({n, cfg.d_model});

    Graph<double> g1;
    ModelGraph<double> m1(g1, params, false);
    auto [oa, ob] = encoder_forward(m1, cfg, g1.constant(fa), g1.constant(fb), gh, gw);
    CHECK(g1.value(oa).shape == fa.shape);
    CHECK(g1.value(ob).shape == fb.shape);

    // swapping the inputs swaps the outputs bit-exactly (shared weights)
    Graph<double> g2;
    ModelGraph<double> m2(g2, params, false);
    auto [sb, sa] = encoder_forward(m2, cfg, g2.constant(fb), g2.constant(fa), gh, gw);
    CHECK(g1.value(oa).data == g2.value(sa).data);
    CHECK(g1.value(ob).data == g2.value(sb).data);

    // identical inputs give identical outputs
    Graph<double> g3;
    ModelGraph<double> m3(g3, params, false);
    auto [ia, ib] = encoder_forward(m3, cfg, g3.constant(fa), g3.constant(fa), gh, gw);
    CHECK(g3.value(ia).data == g3.value(ib).data);

    SUBCASE("mask length mismatch") {
        Graph<double> g;
        ModelGraph<double> m(g, params, false);
        Tensor<double> bad({n + 1});
        const Tensor<double>* no_mask = nullptr;
        CHECK_THROWS_AS(
            encoder_forward(m, cfg, g.constant(fa), g.constant(fb), gh, gw, &bad, no_mask),
            InvalidShape);
    }
}

TEST_CASE("decoder output") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 17);
    Rng rng(18);
    const auto f = rng.normal_tensor<float>({12, cfg.d_model});

    Graph<float> g;
    ModelGraph<float> m(g, params, false);
    Value q = decoder_forward(m, cfg, g.constant(f));
    CHECK(g.value(q).shape == std::vector<std::size_t>{1, cfg.d_model});

    // deterministic for fixed weights and input
    Graph<float> g2;
    ModelGraph<float> m2(g2, params, false);
    Value q2 = decoder_forward(m2, cfg, g2.constant(f));
    CHECK(g.value(q).data == g2.value(q2).data);

    // constant keys make cross-attention insensitive to row order
    Tensor<float> constant_f = Tensor<float>::full({12, cfg.d_model}, 0.42f);
    Graph<float> g3;
    ModelGraph<float> m3(g3, params, false);
    Value q3 = decoder_forward(m3, cfg, g3.constant(constant_f));
    Tensor<float> rolled = constant_f;  // any permutation of identical rows
    Graph<float> g4;
    ModelGraph<float> m4(g4, params, false);
    Value q4 = decoder_forward(m4, cfg, g4.constant(rolled));
    CHECK(g3.value(q3).data == g4.value(q4).data);
}

TEST_CASE("ws-centerness expectations") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 19);
    Rng rng(20);
    const std::size_t gh = 4, gw = 4;

    SUBCASE("uniform logits give the exact grid center") {
        // zeroed FCN weights force constant logits -> uniform probabilities
        auto uniform_params = params;
        for (const auto& name : uniform_params.names())
            if (name.rfind("center.", 0) == 0 && name.back() == 'w')
                uniform_params.at(name).value.fill(0.0f);
        Graph<float> g;
        ModelGraph<float> m(g, uniform_params, false);
        Value f = g.constant(rng.normal_tensor<float>({gh * gw, cfg.d_model}));
        Value q = g.constant(rng.normal_tensor<float>({1, cfg.d_model}));
        auto head = ws_centerness(m, cfg, q, f, gh, gw);
        double sum = 0;
        for (float v : g.value(head.prob_map).data) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(g.value(head.center_x).data[0] == doctest::Approx(0.5).epsilon(1e-5));
        CHECK(g.value(head.center_y).data[0] == doctest::Approx(0.5).epsilon(1e-5));
    }

    SUBCASE("expectation stays inside the unit square") {
        for (int t = 0; t < 10; ++t) {
            Graph<float> g;
            ModelGraph<float> m(g, params, false);
            Value f = g.constant(rng.normal_tensor<float>({gh * gw, cfg.d_model}, 2.0));
            Value q = g.constant(rng.normal_tensor<float>({1, cfg.d_model}, 2.0));
            auto head = ws_centerness(m, cfg, q, f, gh, gw);
            const double cx = g.value(head.center_x).data[0];
            const double cy = g.value(head.center_y).data[0];
            CHECK(cx >= 0.0);
            CHECK(cx <= 1.0);
            CHECK(cy >= 0.0);
            CHECK(cy <= 1.0);
        }
    }
}

TEST_CASE("a delta probability map pins the expectation to its cell center") {
    // spot-check of the expectation arithmetic used by the head
    Graph<float> g;
    const std::size_t gh = 4, gw = 5;
    Tensor<float> logits = Tensor<float>::zeros({gh, gw});
    logits.at(2, 3) = 60.0f;
    Value p = ops::spatial_softmax(g, g.constant(logits));
    Tensor<float> xs({gh, gw}), ys({gh, gw});
    for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j) {
            xs.at(i, j) = static_cast<float>((j + 0.5) / gw);
            ys.at(i, j) = static_cast<float>((i + 0.5) / gh);
        }
    Value cx = ops::dot_const(g, p, xs);
    Value cy = ops::dot_const(g, p, ys);
    CHECK(g.value(cx).data[0] == doctest::Approx((3 + 0.5) / 5.0).epsilon(1e-5));
    CHECK(g.value(cy).data[0] == doctest::Approx((2 + 0.5) / 4.0).epsilon(1e-5));
}

TEST_CASE("box regression range and zero-init") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 21);
    Rng rng(22);
    Graph<float> g;
    ModelGraph<float> m(g, params, false);

    // freshly initialized head has zero pre-activations: all offsets 0.5
    Value q = g.constant(rng.normal_tensor<float>({1, cfg.d_model}));
    Value off = box_regression(m, q);
    for (float v : g.value(off).data) CHECK(v == doctest::Approx(0.5));

    // after perturbing the head, outputs stay strictly inside (0,1)
    params.at("box.1.w").value = rng.normal_tensor<float>({4, cfg.d_model}, 0.0, 0.2);
    for (int t = 0; t < 10; ++t) {
        Graph<float> g2;
        ModelGraph<float> m2(g2, params, false);
        Value o = box_regression(m2, g2.constant(rng.normal_tensor<float>({1, cfg.d_model}, 3.0)));
        for (float v : g2.value(o).data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
}

TEST_CASE("assemble_box arithmetic and clamping") {
    bool degen = false;
    const auto b1 = assemble_box(0.5, 0.5, 0.25, 0.25, 0.25, 0.25, 100, 100, &degen);
    CHECK(b1.x_min == doctest::Approx(25));
    CHECK(b1.y_min == doctest::Approx(25));
    CHECK(b1.x_max == doctest::Approx(75));
    CHECK(b1.y_max == doctest::Approx(75));
    CHECK_FALSE(degen);

    const auto b2 = assemble_box(0.1, 0.1, 0.5, 0.5, 0.2, 0.2, 100, 100, &degen);
    CHECK(b2.x_min == 0.0);
    CHECK(b2.y_min == 0.0);

    const auto b3 = assemble_box(0.5, 0.5, 1e-5, 1e-5, 1e-5, 1e-5, 100, 100, &degen);
    CHECK(degen);
    CHECK(b3.width() == doctest::Approx(1.0));
    CHECK(b3.height() == doctest::Approx(1.0));
}

TEST_CASE("model forward: shapes, bounds, swap equivariance") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<double>(cfg, 23);
    Rng rng(24);
    const auto img_a = rand_image<double>(rng, 64);
    const auto img_b = rand_image<double>(rng, 64);

    Graph<double> g;
    ModelGraph<double> m(g, params, false);
    const auto refs = model_forward(m, cfg, img_a, img_b);
    CHECK(refs.grid_h == 2);
    CHECK(refs.grid_w == 2);
    auto [pa, pb] = extract_predictions(g, refs, 64, 64);
    for (const auto& p : {pa, pb}) {
        CHECK(p.box_px.x_min >= 0.0);
        CHECK(p.box_px.y_min >= 0.0);
        CHECK(p.box_px.x_max <= 64.0);
        CHECK(p.box_px.y_max <= 64.0);
        CHECK(p.box_px.valid());
    }

    // input swap exchanges the predictions bit-exactly in 64-bit mode
    Graph<double> g2;
    ModelGraph<double> m2(g2, params, false);
    const auto swapped = model_forward(m2, cfg, img_b, img_a);
    auto [qb, qa] = extract_predictions(g2, swapped, 64, 64);
    CHECK(pa.prob_map == qa.prob_map);
    CHECK(pa.center_x == qa.center_x);
    CHECK(pa.center_y == qa.center_y);
    CHECK(pa.l == qa.l);
    CHECK(pa.r == qa.r);
    CHECK(pb.prob_map == qb.prob_map);
    CHECK(pb.center_x == qb.center_x);
    CHECK(pa.consistency_x == qa.consistency_x);
    CHECK(pb.consistency_y == qb.consistency_y);
}

TEST_CASE("feature mask follows the padded extent") {
    ModelConfig cfg;  // default stride 32
    const auto mask = feature_mask<float>(cfg, 1216, 1216, 900, 1200);
    CHECK(mask.shape == std::vector<std::size_t>{38, 38});
    // rows with cell centers beyond 900 are padding
    CHECK(mask.at(27, 0) == 1.0f);   // (27.5)*32 = 880 <= 900
    CHECK(mask.at(28, 0) == 0.0f);   // (28.5)*32 = 912 > 900
    CHECK(mask.at(0, 37) == 1.0f);   // (37.5)*32 = 1200 <= 1200
}

TEST_CASE("checkpoint round trip") {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<float>(cfg, 25);
    const auto dir = std::filesystem::temp_directory_path() / "oetr_ckpt_test";
    std::filesystem::remove_all(dir);
    CheckpointMeta meta;
    meta.input_long_side = 64;
    meta.note = "unit";
    save_checkpoint(dir.string(), params, cfg, meta);

    auto ck = load_checkpoint<float>(dir.string());
    CHECK(ck.meta.input_long_side == 64);
    CHECK(ck.meta.note == "unit");
    CHECK(ck.config.d_model == cfg.d_model);
    for (const auto& name : params.names())
        CHECK(ck.params.at(name).value.data == params.at(name).value.data);

    SUBCASE("missing tensors are a load error") {
        std::filesystem::remove(dir / "tensors" / "query");
        CHECK_THROWS_AS(load_checkpoint<float>(dir.string()), IoError);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oetr/gradcheck.hpp"
#include "oetr/ops.hpp"

using namespace oetr;

TEST_CASE("standard op suite passes central-difference checks") {
    for (const auto& rep : gradcheck::standard_suite(42)) {
        INFO(rep.op, " max_rel_err=", rep.max_rel_err);
        CHECK(rep.finite);
        CHECK(rep.max_rel_err < rep.tolerance);
        CHECK(rep.coords_checked > 0);
    }
}

TEST_CASE("gradients are exact for a linear map") {
    // y = sum(W x): analytic vs FD error limited only by rounding
    Rng rng(7);
    auto W = rng.normal_tensor<double>({4, 6});
    auto x = rng.normal_tensor<double>({6, 1});
    auto rep = gradcheck::check(
        "linear_map",
        [](Graph<double>& g, const std::vector<Value>& in) {
            return ops::sum(g, ops::matmul(g, in[0], in[1]));
        },
        {W, x}, 1e-10, /*eps=*/1e-3);  // truncation vanishes for linear ops; big eps kills roundoff
    CHECK(rep.pass());
}

TEST_CASE("backward accumulates across shared subexpressions") {
    Graph<double> g;
    Value x = g.leaf(Tensor<double>::scalar(3.0), true);
    Value y = ops::mul(g, x, x);          // x^2
    Value z = ops::add(g, y, x);          // x^2 + x
    g.backward(z);
    CHECK(g.grad(x).data[0] == doctest::Approx(7.0));  // 2x + 1
}

TEST_CASE("grad_check rejects eps outside the contract") {
    CHECK_THROWS_AS(gradcheck::check(
                        "bad_eps",
                        [](Graph<double>& g, const std::vector<Value>& in) {
                            return ops::sum(g, in[0]);
                        },
                        {Tensor<double>::scalar(1.0)}, 1e-6, 1e-2),
                    InvalidInput);
}

TEST_CASE("shape mismatches raise invalid-shape errors") {
    Graph<double> g;
    Value a = g.leaf(Tensor<double>::zeros({2, 3}), false);
    Value b = g.leaf(Tensor<double>::zeros({3, 3}), false);
    CHECK_THROWS_AS(ops::add(g, a, b), InvalidShape);
    CHECK_THROWS_AS(ops::matmul(g, a, a), InvalidShape);
    Value k = g.leaf(Tensor<double>::zeros({2, 5, 3, 3}), false);
    CHECK_THROWS_AS(ops::conv2d(g, a, k, b, 1, 0), InvalidShape);
}

TEST_CASE("conv2d shape formula and hand examples") {
    Graph<float> g;
    Rng rng(3);

    SUBCASE("identity 1x1 kernel reproduces the input") {
        auto x = rng.normal_tensor<float>({1, 5, 4});
        Value xv = g.leaf(x, false);
        Tensor<float> w({1, 1, 1, 1});
        w.data[0] = 1.0f;
        Value wv = g.leaf(w, false);
        Value bv = g.leaf(Tensor<float>::zeros({1}), false);
        Value y = ops::conv2d(g, xv, wv, bv, 1, 0);
        CHECK(g.value(y).shape == x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(g.value(y).data[i] == doctest::Approx(x.data[i]));
    }

    SUBCASE("2x2 all-ones kernel, stride 2, input [[1,2],[3,4]] -> 10") {
        Tensor<float> x({1, 2, 2}, {1, 2, 3, 4});
        Tensor<float> w = Tensor<float>::full({1, 1, 2, 2}, 1.0f);
        Value y = ops::conv2d(g, g.leaf(x, false), g.leaf(w, false),
                              g.leaf(Tensor<float>::zeros({1}), false), 2, 0);
        CHECK(g.value(y).numel() == 1);
        CHECK(g.value(y).data[0] == doctest::Approx(10.0f));
    }

    SUBCASE("H=W=8, k=4, stride=2, pad=1 -> 4x4") {
        auto x = rng.normal_tensor<float>({2, 8, 8});
        auto w = rng.normal_tensor<float>({3, 2, 4, 4});
        Value y = ops::conv2d(g, g.leaf(x, false), g.leaf(w, false),
                              g.leaf(Tensor<float>::zeros({3}), false), 2, 1);
        CHECK(g.value(y).shape == std::vector<std::size_t>{3, 4, 4});
    }

    SUBCASE("output extent matches the closed form over a sweep") {
        for (std::size_t h = 4; h <= 12; ++h)
            for (std::size_t k = 1; k <= 4; ++k)
                for (std::size_t s = 1; s <= 3; ++s)
                    for (std::size_t p = 0; p <= 2; ++p) {
                        if (h + 2 * p < k) continue;
                        auto x = rng.normal_tensor<float>({1, h, h});
                        auto w = rng.normal_tensor<float>({1, 1, k, k});
                        Value y = ops::conv2d(g, g.leaf(x, false), g.leaf(w, false),
                                              g.leaf(Tensor<float>::zeros({1}), false), s, p);
                        const std::size_t expect = (h + 2 * p - k) / s + 1;
                        CHECK(g.value(y).shape[1] == expect);
                        CHECK(g.value(y).shape[2] == expect);
                    }
    }
}

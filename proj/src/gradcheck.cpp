#include "oetr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "oetr/ops.hpp"

namespace oetr::gradcheck {

Report check(const std::string& name, const BuildFn& build, std::vector<Tensor<double>> inputs,
             double tolerance, double eps, int coords_per_input, std::uint64_t seed) {
    if (eps < 1e-6 || eps > 1e-3) throw InvalidInput("grad_check: eps outside [1e-6, 1e-3]");
    Report rep;
    rep.op = name;
    rep.tolerance = tolerance;

    // Analytic gradients.
    std::vector<Tensor<double>> analytic;
    {
        Graph<double> g;
        std::vector<Value> leaves;
        for (auto& t : inputs) leaves.push_back(g.leaf(t, true));
        Value root = build(g, leaves);
        if (g.value(root).numel() != 1)
            throw InvalidShape("grad_check: computation must be scalar-valued");
        g.backward(root);
        for (Value l : leaves) {
            const auto& grad = g.grad(l);
            if (!grad.all_finite()) rep.finite = false;
            analytic.push_back(grad);
        }
    }

    auto eval = [&](const std::vector<Tensor<double>>& in) {
        Graph<double> g;
        std::vector<Value> leaves;
        for (const auto& t : in) leaves.push_back(g.leaf(t, false));
        return g.value(build(g, leaves)).data[0];
    };

    Rng rng(seed);
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        const std::size_t n = inputs[ti].numel();
        std::vector<std::size_t> coords;
        if (coords_per_input < 0 || static_cast<std::size_t>(coords_per_input) >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int c = 0; c < coords_per_input; ++c) coords.push_back(rng.index(n));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        }
        for (std::size_t i : coords) {
            const double saved = inputs[ti].data[i];
            inputs[ti].data[i] = saved + eps;
            const double fp = eval(inputs);
            inputs[ti].data[i] = saved - eps;
            const double fm = eval(inputs);
            inputs[ti].data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[ti].data[i];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                rep.finite = false;
                continue;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            rep.max_rel_err = std::max(rep.max_rel_err, std::abs(a - numeric) / denom);
            ++rep.coords_checked;
        }
    }
    return rep;
}

namespace {

using V = Value;
using G = Graph<double>;
using Ts = std::vector<Tensor<double>>;

Tensor<double> randn(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
    return rng.normal_tensor<double>(std::move(shape), 0.0, scale);
}

}  // namespace

std::vector<Report> standard_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Report> out;
    const double tol = 1e-6;
    auto run = [&](const std::string& name, const BuildFn& fn, Ts inputs) {
        out.push_back(check(name, fn, std::move(inputs), tol, 1e-5, -1, rng.next_u64()));
    };

    run("add", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::add(g, in[0], in[1])); },
        {randn(rng, {3, 5}), randn(rng, {3, 5})});
    run("sub", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::sub(g, in[0], in[1])); },
        {randn(rng, {4}), randn(rng, {4})});
    run("mul", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::mul(g, in[0], in[1])); },
        {randn(rng, {3, 5}), randn(rng, {3, 5})});
    run("divide",
        [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::divide(g, in[0], in[1])); },
        {randn(rng, {6}), [&] {
             auto t = randn(rng, {6});
             for (auto& v : t.data) v = 1.5 + std::abs(v);  // keep away from 0
             return t;
         }()});
    run("vmin", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::vmin(g, in[0], in[1])); },
        {randn(rng, {8}), randn(rng, {8})});
    run("vmax", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::vmax(g, in[0], in[1])); },
        {randn(rng, {8}), randn(rng, {8})});
    run("affine",
        [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::affine(g, in[0], -2.5, 0.75)); },
        {randn(rng, {7})});
    run("relu", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::relu(g, in[0])); },
        {randn(rng, {9})});
    run("elu1", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::elu1(g, in[0])); },
        {randn(rng, {9})});
    run("sigmoid",
        [](G& g, const std::vector<V>& in) {
            auto s = ops::sigmoid(g, in[0]);
            return ops::sum(g, ops::mul(g, s, s));  // non-trivial cotangent
        },
        {randn(rng, {9})});
    run("abs", [](G& g, const std::vector<V>& in) { return ops::sum(g, ops::abs_val(g, in[0])); },
        {randn(rng, {9})});
    run("mean", [](G& g, const std::vector<V>& in) { return ops::mean(g, in[0]); },
        {randn(rng, {3, 4})});
    run("dot_const",
        [w = randn(rng, {5})](G& g, const std::vector<V>& in) { return ops::dot_const(g, in[0], w); },
        {randn(rng, {5})});
    run("pack_pick",
        [](G& g, const std::vector<V>& in) {
            auto a = ops::pick(g, in[0], 1);
            auto b = ops::pick(g, in[0], 3);
            auto p = ops::pack(g, std::vector<V>{a, b, ops::mul(g, a, b)});
            return ops::sum(g, ops::mul(g, p, p));
        },
        {randn(rng, {5})});
    run("reshape_chw_nc",
        [](G& g, const std::vector<V>& in) {
            auto nc = ops::chw_to_nc(g, in[0]);
            auto back = ops::nc_to_chw(g, nc, 3, 4);
            return ops::sum(g, ops::mul(g, back, back));
        },
        {randn(rng, {2, 3, 4})});
    run("concat_channels",
        [](G& g, const std::vector<V>& in) {
            auto c = ops::concat_channels(g, std::vector<V>{in[0], in[1]});
            return ops::sum(g, ops::mul(g, c, c));
        },
        {randn(rng, {2, 3, 3}), randn(rng, {1, 3, 3})});
    run("matmul",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::matmul(g, in[0], in[1]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {3, 4}), randn(rng, {4, 5})});
    run("linear",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::linear(g, in[0], in[1], in[2]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {3, 4}), randn(rng, {5, 4}), randn(rng, {5})});
    run("rows_dot",
        [](G& g, const std::vector<V>& in) {
            auto s = ops::rows_dot(g, in[0], in[1]);
            return ops::sum(g, ops::mul(g, s, s));
        },
        {randn(rng, {6, 4}), randn(rng, {1, 4})});
    run("row_scale",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::row_scale(g, in[0], in[1]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {6, 4}), randn(rng, {6})});
    run("conv2d_k3s2",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::conv2d(g, in[0], in[1], in[2], 2, 1);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {2, 7, 7}), randn(rng, {3, 2, 3, 3}, 0.5), randn(rng, {3})});
    run("conv2d_k1s1",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::conv2d(g, in[0], in[1], in[2], 1, 0);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {3, 4, 4}), randn(rng, {2, 3, 1, 1}), randn(rng, {2})});
    run("conv2d_k4s2p1",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::conv2d(g, in[0], in[1], in[2], 2, 1);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {2, 6, 6}), randn(rng, {2, 2, 4, 4}, 0.5), randn(rng, {2})});
    run("layer_norm",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::layer_norm(g, in[0], in[1], in[2]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {4, 6}), randn(rng, {6}, 0.5), randn(rng, {6}, 0.5)});
    run("spatial_softmax",
        [w = randn(rng, {5, 4})](G& g, const std::vector<V>& in) {
            auto p = ops::spatial_softmax(g, in[0]);
            return ops::dot_const(g, p, w);
        },
        {randn(rng, {5, 4})});
    {
        Tensor<double> mask({5, 4});
        for (std::size_t i = 0; i < mask.numel(); ++i) mask.data[i] = (i % 3 == 0) ? 0.0 : 1.0;
        run("spatial_softmax_masked",
            [w = randn(rng, {5, 4}), mask](G& g, const std::vector<V>& in) {
                auto p = ops::spatial_softmax(g, in[0], &mask);
                return ops::dot_const(g, p, w);
            },
            {randn(rng, {5, 4})});
    }
    run("linear_attention",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::linear_attention(g, in[0], in[1], in[2]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {5, 4}), randn(rng, {6, 4}), randn(rng, {6, 4})});
    {
        Tensor<double> mask({6});
        for (std::size_t i = 0; i < 6; ++i) mask.data[i] = (i == 2 || i == 5) ? 0.0 : 1.0;
        run("linear_attention_masked",
            [mask](G& g, const std::vector<V>& in) {
                auto y = ops::linear_attention(g, in[0], in[1], in[2], &mask);
                return ops::sum(g, ops::mul(g, y, y));
            },
            {randn(rng, {5, 4}), randn(rng, {6, 4}), randn(rng, {6, 4})});
    }
    run("reference_attention",
        [](G& g, const std::vector<V>& in) {
            auto y = ops::reference_attention(g, in[0], in[1], in[2]);
            return ops::sum(g, ops::mul(g, y, y));
        },
        {randn(rng, {5, 4}), randn(rng, {6, 4}), randn(rng, {6, 4})});
    return out;
}

}  // namespace oetr::gradcheck

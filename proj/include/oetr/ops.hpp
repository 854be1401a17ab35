#pragma once

#include <cmath>
#include <initializer_list>
#include <optional>
#include <vector>

#include "oetr/graph.hpp"
#include "oetr/kernels.hpp"

// Differentiable tensor operations. Every op appends one tape node whose
// backward closure implements the vector-Jacobian product; grad_check
// validates each against central finite differences.
namespace oetr::ops {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw InvalidShape(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Value add(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "add");
    Tensor<T> out = av;
    kernels::axpy(out.numel(), T(1), bv.data.data(), out.data.data());
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) mutable {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(a)) kernels::axpy(go.numel(), T(1), go.data.data(), gr.grad_mut(a).data.data());
        if (gr.requires_grad(b)) kernels::axpy(go.numel(), T(1), go.data.data(), gr.grad_mut(b).data.data());
    });
    return o;
}

template <typename T>
Value sub(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "sub");
    Tensor<T> out = av;
    kernels::axpy(out.numel(), T(-1), bv.data.data(), out.data.data());
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(a)) kernels::axpy(go.numel(), T(1), go.data.data(), gr.grad_mut(a).data.data());
        if (gr.requires_grad(b)) kernels::axpy(go.numel(), T(-1), go.data.data(), gr.grad_mut(b).data.data());
    });
    return o;
}

template <typename T>
Value mul(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "mul");
    Tensor<T> out(av.shape);
    kernels::mul(out.numel(), av.data.data(), bv.data.data(), out.data.data());
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& av2 = gr.value(a);
        const auto& bv2 = gr.value(b);
        if (gr.requires_grad(a)) {
            auto& ga = gr.grad_mut(a);
            for (std::size_t i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i] * bv2.data[i];
        }
        if (gr.requires_grad(b)) {
            auto& gb = gr.grad_mut(b);
            for (std::size_t i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i] * av2.data[i];
        }
    });
    return o;
}

template <typename T>
Value divide(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "divide");
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = av.data[i] / bv.data[i];
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& av2 = gr.value(a);
        const auto& bv2 = gr.value(b);
        if (gr.requires_grad(a)) {
            auto& ga = gr.grad_mut(a);
            for (std::size_t i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i] / bv2.data[i];
        }
        if (gr.requires_grad(b)) {
            auto& gb = gr.grad_mut(b);
            for (std::size_t i = 0; i < go.numel(); ++i)
                gb.data[i] -= go.data[i] * av2.data[i] / (bv2.data[i] * bv2.data[i]);
        }
    });
    return o;
}

// Elementwise min/max; ties route the gradient to the first argument.
template <typename T>
Value vmin(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "vmin");
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(av.data[i], bv.data[i]);
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& av2 = gr.value(a);
        const auto& bv2 = gr.value(b);
        for (std::size_t i = 0; i < go.numel(); ++i) {
            const bool pick_a = av2.data[i] <= bv2.data[i];
            if (pick_a && gr.requires_grad(a)) gr.grad_mut(a).data[i] += go.data[i];
            if (!pick_a && gr.requires_grad(b)) gr.grad_mut(b).data[i] += go.data[i];
        }
    });
    return o;
}

template <typename T>
Value vmax(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    check_same_shape(av, bv, "vmax");
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::max(av.data[i], bv.data[i]);
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& av2 = gr.value(a);
        const auto& bv2 = gr.value(b);
        for (std::size_t i = 0; i < go.numel(); ++i) {
            const bool pick_a = av2.data[i] >= bv2.data[i];
            if (pick_a && gr.requires_grad(a)) gr.grad_mut(a).data[i] += go.data[i];
            if (!pick_a && gr.requires_grad(b)) gr.grad_mut(b).data[i] += go.data[i];
        }
    });
    return o;
}

// y = alpha * x + beta
template <typename T>
Value affine(Graph<T>& g, Value x, T alpha, T beta = T(0)) {
    const auto& xv = g.value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = alpha * xv.data[i] + beta;
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, alpha, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        kernels::axpy(go.numel(), alpha, go.data.data(), gr.grad_mut(x).data.data());
    });
    return o;
}

template <typename T>
Value neg(Graph<T>& g, Value x) { return affine(g, x, T(-1)); }

template <typename T>
Value relu(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = xv.data[i] > T(0) ? xv.data[i] : T(0);
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& xv2 = gr.value(x);
        auto& gx = gr.grad_mut(x);
        for (std::size_t i = 0; i < go.numel(); ++i)
            if (xv2.data[i] > T(0)) gx.data[i] += go.data[i];
    });
    return o;
}

// phi(x) = elu(x) + 1: x+1 for x > 0, exp(x) otherwise. Strictly positive,
// which keeps attention denominators away from zero.
template <typename T>
inline T elu1_scalar(T x) { return x > T(0) ? x + T(1) : std::exp(x); }
template <typename T>
inline T elu1_grad_scalar(T x) { return x > T(0) ? T(1) : std::exp(x); }

template <typename T>
Value elu1(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = elu1_scalar(xv.data[i]);
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& xv2 = gr.value(x);
        auto& gx = gr.grad_mut(x);
        for (std::size_t i = 0; i < go.numel(); ++i)
            gx.data[i] += go.data[i] * elu1_grad_scalar(xv2.data[i]);
    });
    return o;
}

template <typename T>
Value sigmoid(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = T(1) / (T(1) + std::exp(-xv.data[i]));
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& yv = gr.value(out_v);
        auto& gx = gr.grad_mut(x);
        for (std::size_t i = 0; i < go.numel(); ++i)
            gx.data[i] += go.data[i] * yv.data[i] * (T(1) - yv.data[i]);
    });
    return o;
}

// |x| with subgradient 0 at the kink.
template <typename T>
Value abs_val(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::abs(xv.data[i]);
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& xv2 = gr.value(x);
        auto& gx = gr.grad_mut(x);
        for (std::size_t i = 0; i < go.numel(); ++i) {
            const T s = xv2.data[i] > T(0) ? T(1) : (xv2.data[i] < T(0) ? T(-1) : T(0));
            gx.data[i] += go.data[i] * s;
        }
    });
    return o;
}

// Elementwise ops against constants (no gradient into the constant).
template <typename T>
Value add_const(Graph<T>& g, Value x, Tensor<T> c) {
    const auto& xv = g.value(x);
    check_same_shape(xv, c, "add_const");
    Tensor<T> out = xv;
    kernels::axpy(out.numel(), T(1), c.data.data(), out.data.data());
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        kernels::axpy(go.numel(), T(1), go.data.data(), gr.grad_mut(x).data.data());
    });
    return o;
}

template <typename T>
Value mul_const(Graph<T>& g, Value x, Tensor<T> c) {
    const auto& xv = g.value(x);
    check_same_shape(xv, c, "mul_const");
    Tensor<T> out(xv.shape);
    kernels::mul(out.numel(), xv.data.data(), c.data.data(), out.data.data());
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x),
               [x, c = std::move(c), o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const auto& go = gr.grad(out_v);
                   auto& gx = gr.grad_mut(x);
                   for (std::size_t i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * c.data[i];
               });
    return o;
}

// ---------------------------------------------------------------- reductions

template <typename T>
Value sum(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    Tensor<T> out = Tensor<T>::scalar(kernels::sum(xv.numel(), xv.data.data()));
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const T go = gr.grad(out_v).data[0];
        auto& gx = gr.grad_mut(x);
        for (auto& v : gx.data) v += go;
    });
    return o;
}

template <typename T>
Value mean(Graph<T>& g, Value x) {
    const T n = static_cast<T>(g.value(x).numel());
    return affine(g, sum(g, x), T(1) / n);
}

// sum(x .* w) with w constant; used for probability-map expectations.
template <typename T>
Value dot_const(Graph<T>& g, Value x, Tensor<T> w) {
    const auto& xv = g.value(x);
    check_same_shape(xv, w, "dot_const");
    Tensor<T> out = Tensor<T>::scalar(kernels::dot(xv.numel(), xv.data.data(), w.data.data()));
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x),
               [x, w = std::move(w), o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const T go = gr.grad(out_v).data[0];
                   kernels::axpy(w.numel(), go, w.data.data(), gr.grad_mut(x).data.data());
               });
    return o;
}

// ---------------------------------------------------------------- structure

template <typename T>
Value reshape(Graph<T>& g, Value x, std::vector<std::size_t> shape) {
    Tensor<T> out = g.value(x).reshaped(shape);
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        kernels::axpy(go.numel(), T(1), go.data.data(), gr.grad_mut(x).data.data());
    });
    return o;
}

// Scalars -> vector [k].
template <typename T>
Value pack(Graph<T>& g, const std::vector<Value>& xs) {
    Tensor<T> out({xs.size()});
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto& v = g.value(xs[i]);
        if (v.numel() != 1) throw InvalidShape("pack: inputs must be scalars");
        out.data[i] = v.data[0];
    }
    bool req = false;
    for (Value v : xs) req = req || g.requires_grad(v);
    Value o;
    o = g.emit(std::move(out), req, [xs, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (gr.requires_grad(xs[i])) gr.grad_mut(xs[i]).data[0] += go.data[i];
    });
    return o;
}

// Vector element -> scalar.
template <typename T>
Value pick(Graph<T>& g, Value x, std::size_t index) {
    const auto& xv = g.value(x);
    if (index >= xv.numel()) throw InvalidShape("pick: index out of range");
    Tensor<T> out = Tensor<T>::scalar(xv.data[index]);
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, index, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        gr.grad_mut(x).data[index] += gr.grad(out_v).data[0];
    });
    return o;
}

// [C,h,w] -> [h*w, C] (row-major cells, channels last).
template <typename T>
Value chw_to_nc(Graph<T>& g, Value x) {
    const auto& xv = g.value(x);
    if (xv.rank() != 3) throw InvalidShape("chw_to_nc: expected rank-3 input");
    const std::size_t C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
    Tensor<T> out({H * W, C});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H * W; ++i) out.data[i * C + c] = xv.data[c * H * W + i];
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, C, H, W, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        auto& gx = gr.grad_mut(x);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H * W; ++i) gx.data[c * H * W + i] += go.data[i * C + c];
    });
    return o;
}

// [h*w, C] -> [C,h,w].
template <typename T>
Value nc_to_chw(Graph<T>& g, Value x, std::size_t H, std::size_t W) {
    const auto& xv = g.value(x);
    if (xv.rank() != 2 || xv.shape[0] != H * W)
        throw InvalidShape("nc_to_chw: rows must equal H*W");
    const std::size_t C = xv.shape[1];
    Tensor<T> out({C, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H * W; ++i) out.data[c * H * W + i] = xv.data[i * C + c];
    Value o;
    o = g.emit(std::move(out), g.requires_grad(x), [x, C, H, W, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        auto& gx = gr.grad_mut(x);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H * W; ++i) gx.data[i * C + c] += go.data[c * H * W + i];
    });
    return o;
}

// Channel concatenation of [Ci,h,w] maps.
template <typename T>
Value concat_channels(Graph<T>& g, const std::vector<Value>& xs) {
    if (xs.empty()) throw InvalidShape("concat_channels: no inputs");
    const auto& first = g.value(xs[0]);
    if (first.rank() != 3) throw InvalidShape("concat_channels: expected rank-3 inputs");
    const std::size_t H = first.shape[1], W = first.shape[2];
    std::size_t Ctot = 0;
    bool req = false;
    for (Value v : xs) {
        const auto& t = g.value(v);
        if (t.rank() != 3 || t.shape[1] != H || t.shape[2] != W)
            throw InvalidShape("concat_channels: spatial dims differ");
        Ctot += t.shape[0];
        req = req || g.requires_grad(v);
    }
    Tensor<T> out({Ctot, H, W});
    std::size_t off = 0;
    for (Value v : xs) {
        const auto& t = g.value(v);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += t.numel();
    }
    Value o;
    o = g.emit(std::move(out), req, [xs, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        std::size_t off2 = 0;
        for (Value v : xs) {
            const std::size_t n = gr.value(v).numel();
            if (gr.requires_grad(v))
                kernels::axpy(n, T(1), go.data.data() + off2, gr.grad_mut(v).data.data());
            off2 += n;
        }
    });
    return o;
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Value matmul(Graph<T>& g, Value a, Value b) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0])
        throw InvalidShape("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    const std::size_t M = av.shape[0], K = av.shape[1], N = bv.shape[1];
    Tensor<T> out({M, N});
    kernels::gemm_nn(M, N, K, av.data.data(), bv.data.data(), out.data.data());
    const bool req = g.requires_grad(a) || g.requires_grad(b);
    Value o;
    o = g.emit(std::move(out), req, [a, b, M, K, N, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(a))
            kernels::gemm_nt(M, K, N, go.data.data(), gr.value(b).data.data(), gr.grad_mut(a).data.data());
        if (gr.requires_grad(b))
            kernels::gemm_tn(K, N, M, gr.value(a).data.data(), go.data.data(), gr.grad_mut(b).data.data());
    });
    return o;
}

// y = x W^T + bias, with x [N,in], W [out,in], bias [out].
template <typename T>
Value linear(Graph<T>& g, Value x, Value w, Value bias) {
    const auto& xv = g.value(x);
    const auto& wv = g.value(w);
    const auto& bv = g.value(bias);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[1])
        throw InvalidShape("linear: incompatible shapes");
    const std::size_t N = xv.shape[0], in = xv.shape[1], out_dim = wv.shape[0];
    if (bv.numel() != out_dim) throw InvalidShape("linear: bias size mismatch");
    Tensor<T> out({N, out_dim});
    for (std::size_t i = 0; i < N; ++i)
        std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * out_dim));
    kernels::gemm_nt(N, out_dim, in, xv.data.data(), wv.data.data(), out.data.data());
    const bool req = g.requires_grad(x) || g.requires_grad(w) || g.requires_grad(bias);
    Value o;
    o = g.emit(std::move(out), req, [x, w, bias, N, in, out_dim, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(x))
            kernels::gemm_nn(N, in, out_dim, go.data.data(), gr.value(w).data.data(), gr.grad_mut(x).data.data());
        if (gr.requires_grad(w))
            kernels::gemm_tn(out_dim, in, N, go.data.data(), gr.value(x).data.data(), gr.grad_mut(w).data.data());
        if (gr.requires_grad(bias)) {
            auto& gb = gr.grad_mut(bias);
            for (std::size_t i = 0; i < N; ++i)
                kernels::axpy(out_dim, T(1), go.data.data() + i * out_dim, gb.data.data());
        }
    });
    return o;
}

// Per-row dot products: f [N,d], q [1,d] -> [N].
template <typename T>
Value rows_dot(Graph<T>& g, Value f, Value q) {
    const auto& fv = g.value(f);
    const auto& qv = g.value(q);
    if (fv.rank() != 2 || qv.numel() != fv.shape[1]) throw InvalidShape("rows_dot: shape mismatch");
    const std::size_t N = fv.shape[0], d = fv.shape[1];
    Tensor<T> out({N});
    for (std::size_t i = 0; i < N; ++i)
        out.data[i] = kernels::dot(d, fv.data.data() + i * d, qv.data.data());
    const bool req = g.requires_grad(f) || g.requires_grad(q);
    Value o;
    o = g.emit(std::move(out), req, [f, q, N, d, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(f)) {
            auto& gf = gr.grad_mut(f);
            const auto& qv2 = gr.value(q);
            for (std::size_t i = 0; i < N; ++i)
                kernels::axpy(d, go.data[i], qv2.data.data(), gf.data.data() + i * d);
        }
        if (gr.requires_grad(q)) {
            auto& gq = gr.grad_mut(q);
            const auto& fv2 = gr.value(f);
            for (std::size_t i = 0; i < N; ++i)
                kernels::axpy(d, go.data[i], fv2.data.data() + i * d, gq.data.data());
        }
    });
    return o;
}

// Row scaling: f [N,d] * s [N] -> [N,d].
template <typename T>
Value row_scale(Graph<T>& g, Value f, Value s) {
    const auto& fv = g.value(f);
    const auto& sv = g.value(s);
    if (fv.rank() != 2 || sv.numel() != fv.shape[0]) throw InvalidShape("row_scale: shape mismatch");
    const std::size_t N = fv.shape[0], d = fv.shape[1];
    Tensor<T> out({N, d});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < d; ++k) out.data[i * d + k] = fv.data[i * d + k] * sv.data[i];
    const bool req = g.requires_grad(f) || g.requires_grad(s);
    Value o;
    o = g.emit(std::move(out), req, [f, s, N, d, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        if (gr.requires_grad(f)) {
            auto& gf = gr.grad_mut(f);
            const auto& sv2 = gr.value(s);
            for (std::size_t i = 0; i < N; ++i)
                kernels::axpy(d, sv2.data[i], go.data.data() + i * d, gf.data.data() + i * d);
        }
        if (gr.requires_grad(s)) {
            auto& gs = gr.grad_mut(s);
            const auto& fv2 = gr.value(f);
            for (std::size_t i = 0; i < N; ++i)
                gs.data[i] += kernels::dot(d, go.data.data() + i * d, fv2.data.data() + i * d);
        }
    });
    return o;
}

// ---------------------------------------------------------------- conv2d

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
Tensor<T> im2col(const Tensor<T>& x, std::size_t k, std::size_t stride, std::size_t pad,
                 std::size_t Ho, std::size_t Wo) {
    const std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor<T> cols({C * k * k, Ho * Wo});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                T* row = cols.data.data() + ((c * k + ki) * k + kj) * (Ho * Wo);
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        row[oy * Wo + ox] = x.data[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                    }
                }
            }
    return cols;
}

template <typename T>
void col2im_add(const Tensor<T>& cols, std::size_t k, std::size_t stride, std::size_t pad,
                std::size_t Ho, std::size_t Wo, Tensor<T>& x_grad) {
    const std::size_t C = x_grad.shape[0], H = x_grad.shape[1], W = x_grad.shape[2];
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const T* row = cols.data.data() + ((c * k + ki) * k + kj) * (Ho * Wo);
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        x_grad.data[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] += row[oy * Wo + ox];
                    }
                }
            }
}

}  // namespace detail

// Cross-correlation conv: x [C,H,W], w [Co,C,k,k], bias [Co] -> [Co,H',W'].
template <typename T>
Value conv2d(Graph<T>& g, Value x, Value w, Value bias, std::size_t stride, std::size_t pad) {
    const auto& xv = g.value(x);
    const auto& wv = g.value(w);
    const auto& bv = g.value(bias);
    if (xv.rank() != 3 || wv.rank() != 4) throw InvalidShape("conv2d: expected [C,H,W] and [Co,C,k,k]");
    if (wv.shape[1] != xv.shape[0]) throw InvalidShape("conv2d: channel mismatch");
    if (wv.shape[2] != wv.shape[3]) throw InvalidShape("conv2d: kernel must be square");
    const std::size_t C = xv.shape[0], H = xv.shape[1], W = xv.shape[2];
    const std::size_t Co = wv.shape[0], k = wv.shape[2];
    if (k < 1 || stride < 1) throw InvalidShape("conv2d: k and stride must be >= 1");
    if (H + 2 * pad < k || W + 2 * pad < k) throw InvalidShape("conv2d: kernel larger than padded input");
    if (bv.numel() != Co) throw InvalidShape("conv2d: bias size mismatch");
    const std::size_t Ho = conv_out_extent(H, k, stride, pad);
    const std::size_t Wo = conv_out_extent(W, k, stride, pad);

    Tensor<T> cols = detail::im2col(xv, k, stride, pad, Ho, Wo);
    Tensor<T> out({Co, Ho, Wo});
    for (std::size_t co = 0; co < Co; ++co)
        std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(co * Ho * Wo), Ho * Wo, bv.data[co]);
    kernels::gemm_nn(Co, Ho * Wo, C * k * k, wv.data.data(), cols.data.data(), out.data.data());

    const bool req = g.requires_grad(x) || g.requires_grad(w) || g.requires_grad(bias);
    Value o;
    if (!req) return g.emit(std::move(out), false, nullptr);
    o = g.emit(std::move(out), true,
               [x, w, bias, cols = std::move(cols), C, k, stride, pad, Ho, Wo, Co,
                o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const auto& go = gr.grad(out_v);
                   if (gr.requires_grad(bias)) {
                       auto& gb = gr.grad_mut(bias);
                       for (std::size_t co = 0; co < Co; ++co)
                           gb.data[co] += kernels::sum(Ho * Wo, go.data.data() + co * Ho * Wo);
                   }
                   if (gr.requires_grad(w))
                       kernels::gemm_nt(Co, C * k * k, Ho * Wo, go.data.data(), cols.data.data(),
                                        gr.grad_mut(w).data.data());
                   if (gr.requires_grad(x)) {
                       Tensor<T> dcols({C * k * k, Ho * Wo});
                       kernels::gemm_tn(C * k * k, Ho * Wo, Co, gr.value(w).data.data(), go.data.data(),
                                        dcols.data.data());
                       detail::col2im_add(dcols, k, stride, pad, Ho, Wo, gr.grad_mut(x));
                   }
               });
    return o;
}

// ---------------------------------------------------------------- normalization

// Per-row layer norm over the last dim of x [N,d]; gain/bias [d]; eps 1e-5.
template <typename T>
Value layer_norm(Graph<T>& g, Value x, Value gain, Value bias) {
    constexpr T eps = T(1e-5);
    const auto& xv = g.value(x);
    const auto& gv = g.value(gain);
    const auto& bv = g.value(bias);
    if (xv.rank() != 2) throw InvalidShape("layer_norm: expected [N,d]");
    const std::size_t N = xv.shape[0], d = xv.shape[1];
    if (d < 2) throw InvalidShape("layer_norm: d must be >= 2");
    if (gv.numel() != d || bv.numel() != d) throw InvalidShape("layer_norm: gain/bias size mismatch");

    Tensor<T> xhat({N, d});
    Tensor<T> inv_std({N});
    Tensor<T> out({N, d});
    for (std::size_t i = 0; i < N; ++i) {
        const T* row = xv.data.data() + i * d;
        const T mu = kernels::sum(d, row) / static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const T c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std.data[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const T xh = (row[j] - mu) * inv;
            xhat.data[i * d + j] = xh;
            out.data[i * d + j] = gv.data[j] * xh + bv.data[j];
        }
    }
    const bool req = g.requires_grad(x) || g.requires_grad(gain) || g.requires_grad(bias);
    if (!req) return g.emit(std::move(out), false, nullptr);
    Value o;
    o = g.emit(std::move(out), true,
               [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), N, d,
                o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const auto& go = gr.grad(out_v);
                   const auto& gv2 = gr.value(gain);
                   if (gr.requires_grad(gain) || gr.requires_grad(bias)) {
                       auto& gg = gr.grad_mut(gain);
                       auto& gb = gr.grad_mut(bias);
                       for (std::size_t i = 0; i < N; ++i)
                           for (std::size_t j = 0; j < d; ++j) {
                               gg.data[j] += go.data[i * d + j] * xhat.data[i * d + j];
                               gb.data[j] += go.data[i * d + j];
                           }
                   }
                   if (gr.requires_grad(x)) {
                       auto& gx = gr.grad_mut(x);
                       std::vector<T> dxh(d);
                       for (std::size_t i = 0; i < N; ++i) {
                           T mean_dxh = 0, mean_dxh_xh = 0;
                           for (std::size_t j = 0; j < d; ++j) {
                               dxh[j] = go.data[i * d + j] * gv2.data[j];
                               mean_dxh += dxh[j];
                               mean_dxh_xh += dxh[j] * xhat.data[i * d + j];
                           }
                           mean_dxh /= static_cast<T>(d);
                           mean_dxh_xh /= static_cast<T>(d);
                           const T inv = inv_std.data[i];
                           for (std::size_t j = 0; j < d; ++j)
                               gx.data[i * d + j] +=
                                   inv * (dxh[j] - mean_dxh - xhat.data[i * d + j] * mean_dxh_xh);
                       }
                   }
               });
    return o;
}

// ---------------------------------------------------------------- softmax

// Softmax over all cells of a spatial map (any shape). Optional validity
// mask: invalid cells get exactly zero probability and zero gradient.
template <typename T>
Value spatial_softmax(Graph<T>& g, Value logits, const Tensor<T>* mask = nullptr) {
    const auto& xv = g.value(logits);
    if (mask) check_same_shape(xv, *mask, "spatial_softmax mask");
    const std::size_t n = xv.numel();
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (!mask || mask->data[i] > T(0)) mx = std::max(mx, xv.data[i]);
    if (!std::isfinite(double(mx))) throw NumericalError("spatial_softmax: no valid cells");
    Tensor<T> out(xv.shape);
    T z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const T e = (!mask || mask->data[i] > T(0)) ? std::exp(xv.data[i] - mx) : T(0);
        out.data[i] = e;
        z += e;
    }
    kernels::scale(n, T(1) / z, out.data.data());
    Value o;
    o = g.emit(std::move(out), g.requires_grad(logits), [logits, o_id = g.size()](Graph<T>& gr) {
        Value out_v{static_cast<int>(o_id)};
        const auto& go = gr.grad(out_v);
        const auto& p = gr.value(out_v);
        const T inner = kernels::dot(go.numel(), go.data.data(), p.data.data());
        auto& gx = gr.grad_mut(logits);
        for (std::size_t i = 0; i < go.numel(); ++i)
            gx.data[i] += p.data[i] * (go.data[i] - inner);
    });
    return o;
}

// ---------------------------------------------------------------- attention

// Kernelized attention with feature map phi = elu + 1, factored form:
//   out_i = phi(Q_i)^T (sum_j phi(K_j) V_j^T) / (phi(Q_i)^T sum_j phi(K_j))
// O(N d^2). Optional key mask [M] removes masked keys from both sums.
template <typename T>
Value linear_attention(Graph<T>& g, Value q, Value k, Value v, const Tensor<T>* key_mask = nullptr) {
    const auto& qv = g.value(q);
    const auto& kv = g.value(k);
    const auto& vv = g.value(v);
    if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2)
        throw InvalidShape("linear_attention: expected rank-2 Q,K,V");
    const std::size_t N = qv.shape[0], d = qv.shape[1], M = kv.shape[0];
    if (d < 1 || kv.shape[1] != d || vv.shape[0] != M || vv.shape[1] != d)
        throw InvalidShape("linear_attention: Q,K,V dims disagree");
    if (key_mask && key_mask->numel() != M) throw InvalidShape("linear_attention: mask length mismatch");

    Tensor<T> phi_q({N, d}), phi_k({M, d});
    for (std::size_t i = 0; i < N * d; ++i) phi_q.data[i] = elu1_scalar(qv.data[i]);
    for (std::size_t i = 0; i < M * d; ++i) phi_k.data[i] = elu1_scalar(kv.data[i]);
    if (key_mask)
        for (std::size_t j = 0; j < M; ++j)
            if (key_mask->data[j] <= T(0))
                std::fill_n(phi_k.data.begin() + static_cast<std::ptrdiff_t>(j * d), d, T(0));

    Tensor<T> S({d, d});  // phi(K)^T V
    kernels::gemm_tn(d, d, M, phi_k.data.data(), vv.data.data(), S.data.data());
    Tensor<T> z({d});  // sum of phi(K) rows
    for (std::size_t j = 0; j < M; ++j)
        kernels::axpy(d, T(1), phi_k.data.data() + j * d, z.data.data());

    Tensor<T> num({N, d});
    kernels::gemm_nn(N, d, d, phi_q.data.data(), S.data.data(), num.data.data());
    Tensor<T> den({N});
    for (std::size_t i = 0; i < N; ++i)
        den.data[i] = kernels::dot(d, phi_q.data.data() + i * d, z.data.data());
    Tensor<T> out({N, d});
    for (std::size_t i = 0; i < N; ++i) {
        if (!(den.data[i] > T(0)))
            throw NumericalError("linear_attention: non-positive denominator");
        const T inv = T(1) / den.data[i];
        for (std::size_t c = 0; c < d; ++c) out.data[i * d + c] = num.data[i * d + c] * inv;
    }

    const bool req = g.requires_grad(q) || g.requires_grad(k) || g.requires_grad(v);
    if (!req) return g.emit(std::move(out), false, nullptr);
    Value o;
    o = g.emit(std::move(out), true,
               [q, k, v, phi_q = std::move(phi_q), phi_k = std::move(phi_k), S = std::move(S),
                z = std::move(z), den = std::move(den), N, d, M, has_mask = key_mask != nullptr,
                o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const auto& go = gr.grad(out_v);
                   const auto& ov = gr.value(out_v);
                   // dU = dO / den; dden_i = -dot(dO_i, O_i) / den_i
                   Tensor<T> dU({N, d});
                   Tensor<T> dden({N});
                   for (std::size_t i = 0; i < N; ++i) {
                       const T inv = T(1) / den.data[i];
                       for (std::size_t c = 0; c < d; ++c) dU.data[i * d + c] = go.data[i * d + c] * inv;
                       dden.data[i] = -kernels::dot(d, go.data.data() + i * d, ov.data.data() + i * d) * inv;
                   }
                   // dPhiQ = dU S^T + dden z^T
                   Tensor<T> dPhiQ({N, d});
                   kernels::gemm_nt(N, d, d, dU.data.data(), S.data.data(), dPhiQ.data.data());
                   for (std::size_t i = 0; i < N; ++i)
                       kernels::axpy(d, dden.data[i], z.data.data(), dPhiQ.data.data() + i * d);
                   if (gr.requires_grad(q)) {
                       auto& gq = gr.grad_mut(q);
                       const auto& qv2 = gr.value(q);
                       for (std::size_t i = 0; i < N * d; ++i)
                           gq.data[i] += dPhiQ.data[i] * elu1_grad_scalar(qv2.data[i]);
                   }
                   // dS = phiQ^T dU; dz = phiQ^T dden
                   Tensor<T> dS({d, d});
                   kernels::gemm_tn(d, d, N, phi_q.data.data(), dU.data.data(), dS.data.data());
                   Tensor<T> dz({d});
                   for (std::size_t i = 0; i < N; ++i)
                       kernels::axpy(d, dden.data[i], phi_q.data.data() + i * d, dz.data.data());
                   if (gr.requires_grad(v)) {
                       // dV = phiK dS
                       kernels::gemm_nn(M, d, d, phi_k.data.data(), dS.data.data(),
                                        gr.grad_mut(v).data.data());
                   }
                   if (gr.requires_grad(k)) {
                       // dPhiK = V dS^T + 1 dz^T; masked rows (phi_k row exactly zero,
                       // impossible otherwise since phi > 0) receive no gradient.
                       Tensor<T> dPhiK({M, d});
                       kernels::gemm_nt(M, d, d, gr.value(v).data.data(), dS.data.data(), dPhiK.data.data());
                       for (std::size_t j = 0; j < M; ++j)
                           kernels::axpy(d, T(1), dz.data.data(), dPhiK.data.data() + j * d);
                       auto& gk = gr.grad_mut(k);
                       const auto& kv2 = gr.value(k);
                       for (std::size_t j = 0; j < M; ++j) {
                           const bool masked = has_mask &&
                                               kernels::sum(d, phi_k.data.data() + j * d) == T(0);
                           if (masked) continue;
                           for (std::size_t c = 0; c < d; ++c)
                               gk.data[j * d + c] += dPhiK.data[j * d + c] * elu1_grad_scalar(kv2.data[j * d + c]);
                       }
                   }
               });
    return o;
}

// Same attention computed through the explicit N x M weight matrix; the
// O(N^2) oracle the factored form is equivalence-tested against.
template <typename T>
Value reference_attention(Graph<T>& g, Value q, Value k, Value v, const Tensor<T>* key_mask = nullptr) {
    const auto& qv = g.value(q);
    const auto& kv = g.value(k);
    const auto& vv = g.value(v);
    if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2)
        throw InvalidShape("reference_attention: expected rank-2 Q,K,V");
    const std::size_t N = qv.shape[0], d = qv.shape[1], M = kv.shape[0];
    if (d < 1 || kv.shape[1] != d || vv.shape[0] != M || vv.shape[1] != d)
        throw InvalidShape("reference_attention: Q,K,V dims disagree");
    if (key_mask && key_mask->numel() != M)
        throw InvalidShape("reference_attention: mask length mismatch");

    Tensor<T> phi_q({N, d}), phi_k({M, d});
    for (std::size_t i = 0; i < N * d; ++i) phi_q.data[i] = elu1_scalar(qv.data[i]);
    for (std::size_t i = 0; i < M * d; ++i) phi_k.data[i] = elu1_scalar(kv.data[i]);
    if (key_mask)
        for (std::size_t j = 0; j < M; ++j)
            if (key_mask->data[j] <= T(0))
                std::fill_n(phi_k.data.begin() + static_cast<std::ptrdiff_t>(j * d), d, T(0));

    Tensor<T> W({N, M});  // phi(Q) phi(K)^T
    kernels::gemm_nt(N, M, d, phi_q.data.data(), phi_k.data.data(), W.data.data());
    Tensor<T> den({N});
    for (std::size_t i = 0; i < N; ++i) den.data[i] = kernels::sum(M, W.data.data() + i * M);
    Tensor<T> out({N, d});
    kernels::gemm_nn(N, d, M, W.data.data(), vv.data.data(), out.data.data());
    for (std::size_t i = 0; i < N; ++i) {
        if (!(den.data[i] > T(0)))
            throw NumericalError("reference_attention: non-positive denominator");
        kernels::scale(d, T(1) / den.data[i], out.data.data() + i * d);
    }

    const bool req = g.requires_grad(q) || g.requires_grad(k) || g.requires_grad(v);
    if (!req) return g.emit(std::move(out), false, nullptr);
    Value o;
    o = g.emit(std::move(out), true,
               [q, k, v, phi_q = std::move(phi_q), phi_k = std::move(phi_k), W = std::move(W),
                den = std::move(den), N, d, M, has_mask = key_mask != nullptr,
                o_id = g.size()](Graph<T>& gr) {
                   Value out_v{static_cast<int>(o_id)};
                   const auto& go = gr.grad(out_v);
                   const auto& ov = gr.value(out_v);
                   Tensor<T> dWV({N, d});
                   Tensor<T> dden({N});
                   for (std::size_t i = 0; i < N; ++i) {
                       const T inv = T(1) / den.data[i];
                       for (std::size_t c = 0; c < d; ++c) dWV.data[i * d + c] = go.data[i * d + c] * inv;
                       dden.data[i] = -kernels::dot(d, go.data.data() + i * d, ov.data.data() + i * d) * inv;
                   }
                   // dW = dWV V^T + dden 1^T
                   Tensor<T> dW({N, M});
                   kernels::gemm_nt(N, M, d, dWV.data.data(), gr.value(v).data.data(), dW.data.data());
                   for (std::size_t i = 0; i < N; ++i)
                       for (std::size_t j = 0; j < M; ++j) dW.data[i * M + j] += dden.data[i];
                   if (gr.requires_grad(v))
                       kernels::gemm_tn(M, d, N, W.data.data(), dWV.data.data(), gr.grad_mut(v).data.data());
                   if (gr.requires_grad(q)) {
                       Tensor<T> dPhiQ({N, d});
                       kernels::gemm_nn(N, d, M, dW.data.data(), phi_k.data.data(), dPhiQ.data.data());
                       auto& gq = gr.grad_mut(q);
                       const auto& qv2 = gr.value(q);
                       for (std::size_t i = 0; i < N * d; ++i)
                           gq.data[i] += dPhiQ.data[i] * elu1_grad_scalar(qv2.data[i]);
                   }
                   if (gr.requires_grad(k)) {
                       Tensor<T> dPhiK({M, d});
                       kernels::gemm_tn(M, d, N, dW.data.data(), phi_q.data.data(), dPhiK.data.data());
                       auto& gk = gr.grad_mut(k);
                       const auto& kv2 = gr.value(k);
                       for (std::size_t j = 0; j < M; ++j) {
                           const bool masked = has_mask &&
                                               kernels::sum(d, phi_k.data.data() + j * d) == T(0);
                           if (masked) continue;
                           for (std::size_t c = 0; c < d; ++c)
                               gk.data[j * d + c] += dPhiK.data[j * d + c] * elu1_grad_scalar(kv2.data[j * d + c]);
                       }
                   }
               });
    return o;
}

// ---------------------------------------------------------------- encodings

// 2-D sinusoidal positional encoding, base frequency 10000, deterministic.
// Each axis gets d/2 channels as interleaved (sin, cos) pairs over d/4
// frequencies; row layout is [x-pairs..., y-pairs...] for position (x, y).
template <typename T>
Tensor<T> positional_encoding(std::size_t H, std::size_t W, std::size_t d) {
    if (d % 4 != 0) throw InvalidConfig("positional_encoding: d must be divisible by 4");
    const std::size_t pairs = d / 4;
    Tensor<T> pe({H * W, d});
    std::vector<double> omega(pairs);
    for (std::size_t p = 0; p < pairs; ++p)
        omega[p] = std::pow(10000.0, -(4.0 * static_cast<double>(p)) / static_cast<double>(d));
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            T* row = pe.data.data() + (y * W + x) * d;
            for (std::size_t p = 0; p < pairs; ++p) {
                row[2 * p] = static_cast<T>(std::sin(static_cast<double>(x) * omega[p]));
                row[2 * p + 1] = static_cast<T>(std::cos(static_cast<double>(x) * omega[p]));
                row[d / 2 + 2 * p] = static_cast<T>(std::sin(static_cast<double>(y) * omega[p]));
                row[d / 2 + 2 * p + 1] = static_cast<T>(std::cos(static_cast<double>(y) * omega[p]));
            }
        }
    return pe;
}

}  // namespace oetr::ops

#include <cstddef>
#include <limits>

#include "oetr/kernels.hpp"

// Reference kernels. Plain loops, no intrinsics; the oracle the SIMD
// variants are equivalence-tested against.
namespace oetr::kernels {
namespace {

template <typename T>
void gemm_nn_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
    for (std::size_t i = 0; i < M; ++i) {
        T* c = C + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T a = A[i * K + k];
            const T* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

template <typename T>
void gemm_nt_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
    for (std::size_t i = 0; i < M; ++i) {
        const T* a = A + i * K;
        for (std::size_t j = 0; j < N; ++j) {
            const T* b = B + j * K;
            T acc = 0;
            for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
            C[i * N + j] += acc;
        }
    }
}

template <typename T>
void gemm_tn_ref(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
    for (std::size_t k = 0; k < K; ++k) {
        const T* a = A + k * M;
        const T* b = B + k * N;
        for (std::size_t i = 0; i < M; ++i) {
            const T ai = a[i];
            T* c = C + i * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += ai * b[j];
        }
    }
}

template <typename T>
T dot_ref(std::size_t n, const T* a, const T* b) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
void axpy_ref(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void mul_ref(std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <typename T>
void scale_ref(std::size_t n, T alpha, T* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
T sum_ref(std::size_t n, const T* x) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
T max_ref(std::size_t n, const T* x) {
    T m = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

}  // namespace

const Table& scalar_table() {
    static const Table t = {
        "scalar",
        gemm_nn_ref<float>, gemm_nn_ref<double>,
        gemm_nt_ref<float>, gemm_nt_ref<double>,
        gemm_tn_ref<float>, gemm_tn_ref<double>,
        dot_ref<float>, dot_ref<double>,
        axpy_ref<float>, axpy_ref<double>,
        mul_ref<float>, mul_ref<double>,
        scale_ref<float>, scale_ref<double>,
        sum_ref<float>, sum_ref<double>,
        max_ref<float>, max_ref<double>,
    };
    return t;
}

}  // namespace oetr::kernels

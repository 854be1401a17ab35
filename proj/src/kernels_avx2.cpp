#include <cstddef>
#include <limits>

#include "oetr/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

#define OETR_AVX2 __attribute__((target("avx2,fma")))

namespace oetr::kernels {
namespace {

OETR_AVX2 inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_movehdup_ps(lo));
    return _mm_cvtss_f32(lo);
}

OETR_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

OETR_AVX2 void sgemm_nn_avx2(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) {
    for (std::size_t i = 0; i < M; ++i) {
        float* c = C + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const __m256 a = _mm256_set1_ps(A[i * K + k]);
            const float* b = B + k * N;
            std::size_t j = 0;
            for (; j + 8 <= N; j += 8) {
                __m256 cv = _mm256_loadu_ps(c + j);
                cv = _mm256_fmadd_ps(a, _mm256_loadu_ps(b + j), cv);
                _mm256_storeu_ps(c + j, cv);
            }
            const float as = A[i * K + k];
            for (; j < N; ++j) c[j] += as * b[j];
        }
    }
}

OETR_AVX2 void dgemm_nn_avx2(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
    for (std::size_t i = 0; i < M; ++i) {
        double* c = C + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const __m256d a = _mm256_set1_pd(A[i * K + k]);
            const double* b = B + k * N;
            std::size_t j = 0;
            for (; j + 4 <= N; j += 4) {
                __m256d cv = _mm256_loadu_pd(c + j);
                cv = _mm256_fmadd_pd(a, _mm256_loadu_pd(b + j), cv);
                _mm256_storeu_pd(c + j, cv);
            }
            const double as = A[i * K + k];
            for (; j < N; ++j) c[j] += as * b[j];
        }
    }
}

OETR_AVX2 void sgemm_nt_avx2(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) {
    for (std::size_t i = 0; i < M; ++i) {
        const float* a = A + i * K;
        for (std::size_t j = 0; j < N; ++j) {
            const float* b = B + j * K;
            __m256 acc = _mm256_setzero_ps();
            std::size_t k = 0;
            for (; k + 8 <= K; k += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc);
            float s = hsum(acc);
            for (; k < K; ++k) s += a[k] * b[k];
            C[i * N + j] += s;
        }
    }
}

OETR_AVX2 void dgemm_nt_avx2(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
    for (std::size_t i = 0; i < M; ++i) {
        const double* a = A + i * K;
        for (std::size_t j = 0; j < N; ++j) {
            const double* b = B + j * K;
            __m256d acc = _mm256_setzero_pd();
            std::size_t k = 0;
            for (; k + 4 <= K; k += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc);
            double s = hsum(acc);
            for (; k < K; ++k) s += a[k] * b[k];
            C[i * N + j] += s;
        }
    }
}

OETR_AVX2 void sgemm_tn_avx2(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) {
    for (std::size_t k = 0; k < K; ++k) {
        const float* a = A + k * M;
        const float* b = B + k * N;
        for (std::size_t i = 0; i < M; ++i) {
            const __m256 av = _mm256_set1_ps(a[i]);
            float* c = C + i * N;
            std::size_t j = 0;
            for (; j + 8 <= N; j += 8) {
                __m256 cv = _mm256_loadu_ps(c + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + j), cv);
                _mm256_storeu_ps(c + j, cv);
            }
            for (; j < N; ++j) c[j] += a[i] * b[j];
        }
    }
}

OETR_AVX2 void dgemm_tn_avx2(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
    for (std::size_t k = 0; k < K; ++k) {
        const double* a = A + k * M;
        const double* b = B + k * N;
        for (std::size_t i = 0; i < M; ++i) {
            const __m256d av = _mm256_set1_pd(a[i]);
            double* c = C + i * N;
            std::size_t j = 0;
            for (; j + 4 <= N; j += 4) {
                __m256d cv = _mm256_loadu_pd(c + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), cv);
                _mm256_storeu_pd(c + j, cv);
            }
            for (; j < N; ++j) c[j] += a[i] * b[j];
        }
    }
}

OETR_AVX2 float sdot_avx2(std::size_t n, const float* a, const float* b) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

OETR_AVX2 double ddot_avx2(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

OETR_AVX2 void saxpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 a = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(a, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

OETR_AVX2 void daxpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

OETR_AVX2 void smul_avx2(std::size_t n, const float* a, const float* b, float* c) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

OETR_AVX2 void dmul_avx2(std::size_t n, const double* a, const double* b, double* c) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

OETR_AVX2 void sscale_avx2(std::size_t n, float alpha, float* x) {
    const __m256 a = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(a, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

OETR_AVX2 void dscale_avx2(std::size_t n, double alpha, double* x) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(a, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

OETR_AVX2 float ssum_avx2(std::size_t n, const float* x) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

OETR_AVX2 double dsum_avx2(std::size_t n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

OETR_AVX2 float smax_avx2(std::size_t n, const float* x) {
    float m = -std::numeric_limits<float>::infinity();
    __m256 acc = _mm256_set1_ps(m);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_max_ps(acc, _mm256_loadu_ps(x + i));
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, acc);
    for (float v : lanes) m = v > m ? v : m;
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

OETR_AVX2 double dmax_avx2(std::size_t n, const double* x) {
    double m = -std::numeric_limits<double>::infinity();
    __m256d acc = _mm256_set1_pd(m);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (double v : lanes) m = v > m ? v : m;
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

}  // namespace

const Table* avx2_table() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    static const Table t = {
        "avx2",
        sgemm_nn_avx2, dgemm_nn_avx2,
        sgemm_nt_avx2, dgemm_nt_avx2,
        sgemm_tn_avx2, dgemm_tn_avx2,
        sdot_avx2, ddot_avx2,
        saxpy_avx2, daxpy_avx2,
        smul_avx2, dmul_avx2,
        sscale_avx2, dscale_avx2,
        ssum_avx2, dsum_avx2,
        smax_avx2, dmax_avx2,
    };
    return &t;
}

}  // namespace oetr::kernels

#else  // non-x86: scalar only

namespace oetr::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace oetr::kernels

#endif

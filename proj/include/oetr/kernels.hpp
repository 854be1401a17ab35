#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the tensor ops. Scalar reference
// implementations and AVX2+FMA variants live side by side; the active table
// is chosen once at runtime from CPU features (override with
// OETR_KERNELS=scalar|avx2). GEMM kernels accumulate into C; all matrices
// are row-major.
namespace oetr::kernels {

struct Table {
    const char* name;

    // C[M,N] += A[M,K] * B[K,N]
    void (*sgemm_nn)(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C);
    void (*dgemm_nn)(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C);
    // C[M,N] += A[M,K] * B[N,K]^T
    void (*sgemm_nt)(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C);
    void (*dgemm_nt)(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C);
    // C[M,N] += A[K,M]^T * B[K,N]
    void (*sgemm_tn)(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C);
    void (*dgemm_tn)(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C);

    float (*sdot)(std::size_t n, const float* a, const float* b);
    double (*ddot)(std::size_t n, const double* a, const double* b);
    // y += alpha * x
    void (*saxpy)(std::size_t n, float alpha, const float* x, float* y);
    void (*daxpy)(std::size_t n, double alpha, const double* x, double* y);
    // c = a .* b
    void (*smul)(std::size_t n, const float* a, const float* b, float* c);
    void (*dmul)(std::size_t n, const double* a, const double* b, double* c);
    // x *= alpha
    void (*sscale)(std::size_t n, float alpha, float* x);
    void (*dscale)(std::size_t n, double alpha, double* x);
    float (*ssum)(std::size_t n, const float* x);
    double (*dsum)(std::size_t n, const double* x);
    float (*smax)(std::size_t n, const float* x);
    double (*dmax)(std::size_t n, const double* x);
};

const Table& scalar_table();
const Table* avx2_table();     // nullptr when the CPU lacks AVX2+FMA
const Table& active();
std::string active_name();

// Typed convenience wrappers over the active table.
inline void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) { active().sgemm_nn(M, N, K, A, B, C); }
inline void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) { active().dgemm_nn(M, N, K, A, B, C); }
inline void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) { active().sgemm_nt(M, N, K, A, B, C); }
inline void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) { active().dgemm_nt(M, N, K, A, B, C); }
inline void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const float* A, const float* B, float* C) { active().sgemm_tn(M, N, K, A, B, C); }
inline void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) { active().dgemm_tn(M, N, K, A, B, C); }
inline float dot(std::size_t n, const float* a, const float* b) { return active().sdot(n, a, b); }
inline double dot(std::size_t n, const double* a, const double* b) { return active().ddot(n, a, b); }
inline void axpy(std::size_t n, float alpha, const float* x, float* y) { active().saxpy(n, alpha, x, y); }
inline void axpy(std::size_t n, double alpha, const double* x, double* y) { active().daxpy(n, alpha, x, y); }
inline void mul(std::size_t n, const float* a, const float* b, float* c) { active().smul(n, a, b, c); }
inline void mul(std::size_t n, const double* a, const double* b, double* c) { active().dmul(n, a, b, c); }
inline void scale(std::size_t n, float alpha, float* x) { active().sscale(n, alpha, x); }
inline void scale(std::size_t n, double alpha, double* x) { active().dscale(n, alpha, x); }
inline float sum(std::size_t n, const float* x) { return active().ssum(n, x); }
inline double sum(std::size_t n, const double* x) { return active().dsum(n, x); }
inline float max(std::size_t n, const float* x) { return active().smax(n, x); }
inline double max(std::size_t n, const double* x) { return active().dmax(n, x); }

}  // namespace oetr::kernels

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oetr/kernels.hpp"
#include "oetr/tensor.hpp"

using namespace oetr;

namespace {

// Relative tolerance for comparing scalar vs SIMD accumulation orders.
template <typename T>
double tol_for();
template <>
double tol_for<float>() { return 2e-5; }
template <>
double tol_for<double>() { return 1e-13; }

template <typename T>
void expect_close(const std::vector<T>& a, const std::vector<T>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(double(a[i])), std::abs(double(b[i])), 1.0});
        CHECK(std::abs(double(a[i]) - double(b[i])) / denom < tol);
    }
}

template <typename T>
struct Gemm {
    using Fn = void (*)(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);
};

template <typename T>
void check_gemm_pair(typename Gemm<T>::Fn ref, typename Gemm<T>::Fn simd, std::size_t M,
                     std::size_t N, std::size_t K, std::size_t a_rows, std::size_t a_cols,
                     std::size_t b_rows, std::size_t b_cols, Rng& rng) {
    auto A = rng.normal_tensor<T>({a_rows, a_cols});
    auto B = rng.normal_tensor<T>({b_rows, b_cols});
    auto C0 = rng.normal_tensor<T>({M, N});  // accumulation semantics: start non-zero
    auto C1 = C0;
    ref(M, N, K, A.data.data(), B.data.data(), C0.data.data());
    simd(M, N, K, A.data.data(), B.data.data(), C1.data.data());
    expect_close(C0.data, C1.data, tol_for<T>());
}

}  // namespace

TEST_CASE("active kernel table reports a name") {
    CHECK(!kernels::active_name().empty());
}

TEST_CASE("scalar vs simd gemm equivalence across shapes") {
    const kernels::Table* simd = kernels::avx2_table();
    if (!simd) return;  // nothing to compare on this host
    const kernels::Table& ref = kernels::scalar_table();
    Rng rng(123);
    // sizes straddle the vector width, including ragged tails
    const std::size_t sizes[][3] = {{1, 1, 1}, {2, 3, 4},  {5, 8, 7},   {8, 8, 8},
                                    {3, 17, 9}, {16, 33, 12}, {7, 25, 31}, {32, 64, 48}};
    for (auto [M, N, K] : sizes) {
        check_gemm_pair<float>(ref.sgemm_nn, simd->sgemm_nn, M, N, K, M, K, K, N, rng);
        check_gemm_pair<double>(ref.dgemm_nn, simd->dgemm_nn, M, N, K, M, K, K, N, rng);
        check_gemm_pair<float>(ref.sgemm_nt, simd->sgemm_nt, M, N, K, M, K, N, K, rng);
        check_gemm_pair<double>(ref.dgemm_nt, simd->dgemm_nt, M, N, K, M, K, N, K, rng);
        check_gemm_pair<float>(ref.sgemm_tn, simd->sgemm_tn, M, N, K, K, M, K, N, rng);
        check_gemm_pair<double>(ref.dgemm_tn, simd->dgemm_tn, M, N, K, K, M, K, N, rng);
    }
}

TEST_CASE("scalar vs simd vector kernels") {
    const kernels::Table* simd = kernels::avx2_table();
    if (!simd) return;
    const kernels::Table& ref = kernels::scalar_table();
    Rng rng(77);
    for (std::size_t n : {1u, 3u, 8u, 9u, 31u, 64u, 257u}) {
        auto xf = rng.normal_tensor<float>({n});
        auto yf = rng.normal_tensor<float>({n});
        auto xd = rng.normal_tensor<double>({n});
        auto yd = rng.normal_tensor<double>({n});

        CHECK(std::abs(ref.sdot(n, xf.data.data(), yf.data.data()) -
                       simd->sdot(n, xf.data.data(), yf.data.data())) < n * 1e-4);
        CHECK(std::abs(ref.ddot(n, xd.data.data(), yd.data.data()) -
                       simd->ddot(n, xd.data.data(), yd.data.data())) < n * 1e-12);
        CHECK(std::abs(ref.ssum(n, xf.data.data()) - simd->ssum(n, xf.data.data())) < n * 1e-5);
        CHECK(std::abs(ref.dsum(n, xd.data.data()) - simd->dsum(n, xd.data.data())) < n * 1e-13);
        CHECK(ref.smax(n, xf.data.data()) == simd->smax(n, xf.data.data()));
        CHECK(ref.dmax(n, xd.data.data()) == simd->dmax(n, xd.data.data()));

        auto y0 = yf;
        auto y1 = yf;
        ref.saxpy(n, 0.37f, xf.data.data(), y0.data.data());
        simd->saxpy(n, 0.37f, xf.data.data(), y1.data.data());
        expect_close(y0.data, y1.data, tol_for<float>());

        auto z0 = yd;
        auto z1 = yd;
        ref.daxpy(n, -1.83, xd.data.data(), z0.data.data());
        simd->daxpy(n, -1.83, xd.data.data(), z1.data.data());
        expect_close(z0.data, z1.data, tol_for<double>());

        std::vector<float> m0(n), m1(n);
        ref.smul(n, xf.data.data(), yf.data.data(), m0.data());
        simd->smul(n, xf.data.data(), yf.data.data(), m1.data());
        expect_close(m0, m1, tol_for<float>());

        auto s0 = xd;
        auto s1 = xd;
        ref.dscale(n, 2.5, s0.data.data());
        simd->dscale(n, 2.5, s1.data.data());
        expect_close(s0.data, s1.data, tol_for<double>());
    }
}

TEST_CASE("gemm matches a hand example") {
    // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
    const float A[] = {1, 2, 3, 4};
    const float B[] = {5, 6, 7, 8};
    float C[] = {0, 0, 0, 0};
    kernels::gemm_nn(2, 2, 2, A, B, C);
    CHECK(C[0] == 19);
    CHECK(C[1] == 22);
    CHECK(C[2] == 43);
    CHECK(C[3] == 50);
}

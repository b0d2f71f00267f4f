#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../../src/gemm.hpp"
#include "ecnn/rng.hpp"

using ecnn::Rng;
using ecnn::detail::gemm_acc;
using ecnn::detail::MatView;

namespace {

// Element (r, c) of a rows x cols matrix stored row-major or transposed.
MatView view(const std::vector<double>& m, std::size_t rows, std::size_t cols, bool transposed) {
    return transposed ? MatView{m.data(), 1, static_cast<std::ptrdiff_t>(rows)}
                      : MatView{m.data(), static_cast<std::ptrdiff_t>(cols), 1};
}

double at(const MatView& v, std::size_t r, std::size_t c) {
    return v.data[static_cast<std::ptrdiff_t>(r) * v.row_stride + static_cast<std::ptrdiff_t>(c) * v.col_stride];
}

void check(std::size_t M, std::size_t N, std::size_t K, bool ta, bool tb, Rng& rng) {
    std::vector<double> a(M * K), b(K * N), c(M * N);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    for (auto& v : c) v = rng.uniform(-1, 1);
    const MatView A = view(a, M, K, ta), B = view(b, K, N, tb);
    std::vector<double> want = c;
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t k = 0; k < K; ++k) want[i * N + j] = std::fma(at(A, i, k), at(B, k, j), want[i * N + j]);
    gemm_acc(M, N, K, A, B, c.data(), N);
    for (std::size_t i = 0; i < M * N; ++i) {
        ASSERT_EQ(c[i], want[i]) << M << 'x' << N << 'x' << K << " ta " << ta << " tb " << tb << " at " << i;
    }
}

}  // namespace

TEST(Gemm, BitIdenticalToAscendingFmaChain) {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const std::size_t M = 1 + rng.below(20), N = 1 + rng.below(40), K = 1 + rng.below(300);
        check(M, N, K, rng.below(2), rng.below(2), rng);
    }
}

TEST(Gemm, SingleRowAndBlockEdges) {
    Rng rng(12);
    for (bool ta : {false, true})
        for (bool tb : {false, true}) {
            check(1, 37, 513, ta, tb, rng);
            check(1, 1, 1, ta, tb, rng);
            check(7, 2049, 3, ta, tb, rng);
            check(97, 17, 257, ta, tb, rng);
        }
}

TEST(Gemm, EmptyDimensionsLeaveCUntouched) {
    std::vector<double> c{1.5};
    const std::vector<double> none;
    gemm_acc(1, 1, 0, MatView{none.data(), 0, 1}, MatView{none.data(), 1, 1}, c.data(), 1);
    EXPECT_EQ(c[0], 1.5);
}

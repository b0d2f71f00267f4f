#include "gemm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace ecnn::detail {

namespace {

constexpr std::size_t MR = 6;
constexpr std::size_t NR = 16;
constexpr std::size_t KC = 256;
constexpr std::size_t MC = 96;
constexpr std::size_t NC = 2048;

// Packed A panel: ap[k * MR + r]; packed B panel: bp[k * NR + c].
// c is an MR x NR tile with row stride ldc.
void micro_kernel(std::size_t kc, const double* ap, const double* bp, double* c, std::size_t ldc) {
#if defined(__AVX512F__)
    __m512d acc[MR][2];
#pragma GCC unroll 6
    for (std::size_t r = 0; r < MR; ++r) {
        acc[r][0] = _mm512_loadu_pd(c + r * ldc);
        acc[r][1] = _mm512_loadu_pd(c + r * ldc + 8);
    }
    for (std::size_t k = 0; k < kc; ++k) {
        const __m512d b0 = _mm512_loadu_pd(bp + k * NR);
        const __m512d b1 = _mm512_loadu_pd(bp + k * NR + 8);
#pragma GCC unroll 6
        for (std::size_t r = 0; r < MR; ++r) {
            const __m512d a = _mm512_set1_pd(ap[k * MR + r]);
            acc[r][0] = _mm512_fmadd_pd(a, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_pd(a, b1, acc[r][1]);
        }
    }
#pragma GCC unroll 6
    for (std::size_t r = 0; r < MR; ++r) {
        _mm512_storeu_pd(c + r * ldc, acc[r][0]);
        _mm512_storeu_pd(c + r * ldc + 8, acc[r][1]);
    }
#else
    double acc[MR][NR];
    for (std::size_t r = 0; r < MR; ++r)
        for (std::size_t n = 0; n < NR; ++n) acc[r][n] = c[r * ldc + n];
    for (std::size_t k = 0; k < kc; ++k) {
        for (std::size_t r = 0; r < MR; ++r) {
            const double a = ap[k * MR + r];
            for (std::size_t n = 0; n < NR; ++n) acc[r][n] = std::fma(a, bp[k * NR + n], acc[r][n]);
        }
    }
    for (std::size_t r = 0; r < MR; ++r)
        for (std::size_t n = 0; n < NR; ++n) c[r * ldc + n] = acc[r][n];
#endif
}

// Rows past M are packed as zeros; they only feed tile rows that are discarded.
void pack_a(const MatView& A, std::size_t m0, std::size_t mc, std::size_t k0, std::size_t kc,
            double* out) {
    for (std::size_t p = 0; p < mc; p += MR) {
        const std::size_t rows = std::min(MR, mc - p);
        for (std::size_t k = 0; k < kc; ++k) {
            const double* src = A.data + static_cast<std::ptrdiff_t>(k0 + k) * A.col_stride;
            for (std::size_t r = 0; r < MR; ++r) {
                *out++ = r < rows ? src[static_cast<std::ptrdiff_t>(m0 + p + r) * A.row_stride] : 0.0;
            }
        }
    }
}

void pack_b(const MatView& B, std::size_t n0, std::size_t nc, std::size_t k0, std::size_t kc,
            double* out) {
    for (std::size_t p = 0; p < nc; p += NR) {
        const std::size_t cols = std::min(NR, nc - p);
        for (std::size_t k = 0; k < kc; ++k) {
            const double* src = B.data + static_cast<std::ptrdiff_t>(k0 + k) * B.row_stride;
            for (std::size_t n = 0; n < NR; ++n) {
                *out++ = n < cols ? src[static_cast<std::ptrdiff_t>(n0 + p + n) * B.col_stride] : 0.0;
            }
        }
    }
}

// M == 1: no packing. Same per-element chain as the blocked path.
void row_times_matrix(std::size_t N, std::size_t K, const MatView& A, const MatView& B, double* c) {
    if (B.col_stride == 1) {
        for (std::size_t k = 0; k < K; ++k) {
            const double a = A.data[static_cast<std::ptrdiff_t>(k) * A.col_stride];
            const double* b = B.data + static_cast<std::ptrdiff_t>(k) * B.row_stride;
            std::size_t n = 0;
#if defined(__AVX512F__)
            const __m512d av = _mm512_set1_pd(a);
            for (; n + 8 <= N; n += 8) {
                _mm512_storeu_pd(c + n, _mm512_fmadd_pd(av, _mm512_loadu_pd(b + n), _mm512_loadu_pd(c + n)));
            }
#endif
            for (; n < N; ++n) c[n] = std::fma(a, b[n], c[n]);
        }
        return;
    }
    // Independent chains across a block of columns hide fma latency.
    constexpr std::size_t NB = 16;
    for (std::size_t n0 = 0; n0 < N; n0 += NB) {
        const std::size_t nb = std::min(NB, N - n0);
        double acc[NB];
        for (std::size_t j = 0; j < nb; ++j) acc[j] = c[n0 + j];
        for (std::size_t k = 0; k < K; ++k) {
            const double a = A.data[static_cast<std::ptrdiff_t>(k) * A.col_stride];
            const double* b = B.data + static_cast<std::ptrdiff_t>(k) * B.row_stride +
                              static_cast<std::ptrdiff_t>(n0) * B.col_stride;
            for (std::size_t j = 0; j < nb; ++j) {
                acc[j] = std::fma(a, b[static_cast<std::ptrdiff_t>(j) * B.col_stride], acc[j]);
            }
        }
        for (std::size_t j = 0; j < nb; ++j) c[n0 + j] = acc[j];
    }
}

}  // namespace

void gemm_acc(std::size_t M, std::size_t N, std::size_t K, MatView A, MatView B, double* C,
              std::size_t ldc) {
    if (M == 0 || N == 0 || K == 0) return;
    if (M == 1) {
        row_times_matrix(N, K, A, B, C);
        return;
    }
    thread_local std::vector<double> apack, bpack;
    apack.resize(((std::min(MC, M) + MR - 1) / MR) * MR * KC);
    bpack.resize(((std::min(NC, N) + NR - 1) / NR) * NR * KC);
    double edge[MR * NR];

    for (std::size_t n0 = 0; n0 < N; n0 += NC) {
        const std::size_t nc = std::min(NC, N - n0);
        // Ascending k blocks keep each element's fma chain in reduction order.
        for (std::size_t k0 = 0; k0 < K; k0 += KC) {
            const std::size_t kc = std::min(KC, K - k0);
            pack_b(B, n0, nc, k0, kc, bpack.data());
            for (std::size_t m0 = 0; m0 < M; m0 += MC) {
                const std::size_t mc = std::min(MC, M - m0);
                pack_a(A, m0, mc, k0, kc, apack.data());
                for (std::size_t jp = 0; jp < nc; jp += NR) {
                    const double* bp = bpack.data() + (jp / NR) * NR * kc;
                    const std::size_t cols = std::min(NR, nc - jp);
                    for (std::size_t ip = 0; ip < mc; ip += MR) {
                        const double* ap = apack.data() + (ip / MR) * MR * kc;
                        const std::size_t rows = std::min(MR, mc - ip);
                        double* c = C + (m0 + ip) * ldc + n0 + jp;
                        if (rows == MR && cols == NR) {
                            micro_kernel(kc, ap, bp, c, ldc);
                            continue;
                        }
                        for (std::size_t r = 0; r < MR; ++r)
                            for (std::size_t n = 0; n < NR; ++n)
                                edge[r * NR + n] = (r < rows && n < cols) ? c[r * ldc + n] : 0.0;
                        micro_kernel(kc, ap, bp, edge, NR);
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t n = 0; n < cols; ++n) c[r * ldc + n] = edge[r * NR + n];
                    }
                }
            }
        }
    }
}

}  // namespace ecnn::detail

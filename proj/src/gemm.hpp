#pragma once

#include <cstddef>

namespace ecnn::detail {

// Strided read-only view: element (r, c) lives at data[r * row_stride + c * col_stride].
struct MatView {
    const double* data;
    std::ptrdiff_t row_stride;
    std::ptrdiff_t col_stride;
};

// C[M][N] (row-major, leading dimension ldc) += A[M][K] * B[K][N].
//
// Every C element is updated by a chain of fused multiply-adds over the
// reduction index in ascending order, starting from its incoming value. The
// vector and scalar paths perform the same operations, so results are
// bit-identical whichever is compiled in.
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, MatView A, MatView B, double* C,
              std::size_t ldc);

}  // namespace ecnn::detail

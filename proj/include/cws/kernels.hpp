#pragma once

#include <cstddef>

// Dense kernels under all model math. Every kernel exists twice:
//
//   cws::kernels::ref  -- plain serial loops, the reference used by tests
//   cws::kernels       -- OpenMP versions used by the models
//
// The parallel loops split work across output elements only, and each
// output element is accumulated in the same index order as the reference,
// so results are bit-identical to the reference at any thread count.

namespace cws::kernels {

// Work threshold (rows * cols) below which the parallel entry points run
// the serial path. Spawning a team for tiny gate matrices costs more than
// the multiply itself.
inline constexpr std::size_t kParallelCutoff = 16384;

namespace ref {

// y = W x, W row-major [rows x cols]
void matvec(const double* w, const double* x, double* y, int rows, int cols);
// y += W x
void matvec_acc(const double* w, const double* x, double* y, int rows, int cols);
// dx += W^T dy
void matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols);
// dW += dy x^T
void outer_acc(double* dw, const double* dy, const double* x, int rows, int cols);

}  // namespace ref

void matvec(const double* w, const double* x, double* y, int rows, int cols);
void matvec_acc(const double* w, const double* x, double* y, int rows, int cols);
void matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols);
void outer_acc(double* dw, const double* dy, const double* x, int rows, int cols);

}  // namespace cws::kernels

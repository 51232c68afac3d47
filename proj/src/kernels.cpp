#include "cws/kernels.hpp"

namespace cws::kernels {

namespace ref {

void matvec(const double* w, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + std::size_t(r) * cols;
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

void matvec_acc(const double* w, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + std::size_t(r) * cols;
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

// Column-outer traversal: each dx[c] is one serial dot product, matching the
// per-element order of the parallel version.
void matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols) {
  for (int c = 0; c < cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += w[std::size_t(r) * cols + c] * dy[r];
    dx[c] += s;
  }
}

void outer_acc(double* dw, const double* dy, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = dw + std::size_t(r) * cols;
    const double d = dy[r];
    for (int c = 0; c < cols; ++c) row[c] += d * x[c];
  }
}

}  // namespace ref

void matvec(const double* w, const double* x, double* y, int rows, int cols) {
#ifdef _OPENMP
  if (std::size_t(rows) * cols >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      const double* row = w + std::size_t(r) * cols;
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += row[c] * x[c];
      y[r] = s;
    }
    return;
  }
#endif
  ref::matvec(w, x, y, rows, cols);
}

void matvec_acc(const double* w, const double* x, double* y, int rows, int cols) {
#ifdef _OPENMP
  if (std::size_t(rows) * cols >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      const double* row = w + std::size_t(r) * cols;
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += row[c] * x[c];
      y[r] += s;
    }
    return;
  }
#endif
  ref::matvec_acc(w, x, y, rows, cols);
}

void matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols) {
#ifdef _OPENMP
  if (std::size_t(rows) * cols >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int r = 0; r < rows; ++r) s += w[std::size_t(r) * cols + c] * dy[r];
      dx[c] += s;
    }
    return;
  }
#endif
  ref::matvec_t_acc(w, dy, dx, rows, cols);
}

void outer_acc(double* dw, const double* dy, const double* x, int rows, int cols) {
#ifdef _OPENMP
  if (std::size_t(rows) * cols >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      double* row = dw + std::size_t(r) * cols;
      const double d = dy[r];
      for (int c = 0; c < cols; ++c) row[c] += d * x[c];
    }
    return;
  }
#endif
  ref::outer_acc(dw, dy, x, rows, cols);
}

}  // namespace cws::kernels

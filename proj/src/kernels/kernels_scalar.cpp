#include "fgpac/kernels.hpp"

namespace fgpac::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm_scalar(const double* a, std::size_t n) { return dot_scalar(a, a, n); }

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = dot_scalar(a + r * cols, x, cols);
    y[r] = bias != nullptr ? v + bias[r] : v;
  }
}

void gemv_t_acc_scalar(const double* a, std::size_t rows, std::size_t cols, const double* v,
                       double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (v[r] != 0.0) axpy_scalar(v[r], a + r * cols, y, cols);
  }
}

void rank1_acc_scalar(double* a, std::size_t rows, std::size_t cols, double alpha,
                      const double* u, const double* v) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = alpha * u[r];
    if (s != 0.0) axpy_scalar(s, v, a + r * cols, cols);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{dot_scalar,  squared_norm_scalar, axpy_scalar,
                             gemv_scalar, gemv_t_acc_scalar,   rank1_acc_scalar};
  return t;
}

}  // namespace fgpac::kernels

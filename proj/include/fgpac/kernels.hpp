#pragma once

// Dense double-precision kernels used by the model forward/backward passes and
// by the Monte-Carlo loops. Every kernel has a portable scalar reference and,
// on x86-64, an AVX2+FMA variant; the variant is picked once at runtime.
//
// Matrices are row-major with a contiguous leading dimension equal to `cols`.

#include <cstddef>
#include <span>
#include <string_view>

namespace fgpac::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_norm)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x (+ bias when bias != nullptr)
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x,
               const double* bias, double* y);
  // y += A^T v
  void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols, const double* v,
                     double* y);
  // A += alpha * u v^T
  void (*rank1_acc)(double* a, std::size_t rows, std::size_t cols, double alpha, const double* u,
                    const double* v);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif

/// True when the running CPU supports the AVX2 variant.
bool avx2_available();

/// Currently dispatched ISA. Defaults to the best available one unless the
/// environment variable FGPAC_FORCE_SCALAR is set to a non-empty value.
Isa active_isa();

/// Overrides dispatch (tests and benchmarking). Throws if the ISA is unavailable.
void set_isa(Isa isa);

std::string_view isa_name(Isa isa);

const KernelTable& table();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return table().dot(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const double> a) {
  return table().squared_norm(a.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  table().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace fgpac::kernels

#include <atomic>
#include <cstdlib>
#include <stdexcept>

#include "fgpac/kernels.hpp"

namespace fgpac::kernels {
namespace {

Isa detect() {
  const char* force = std::getenv("FGPAC_FORCE_SCALAR");
  if (force != nullptr && *force != '\0') return Isa::Scalar;
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) {
    throw std::runtime_error("AVX2 kernels requested but not supported by this CPU");
  }
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

const KernelTable& table() {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::Avx2) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace fgpac::kernels

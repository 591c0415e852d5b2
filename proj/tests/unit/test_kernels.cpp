#include <stdexcept>
#include <random>

#include "doctest.h"
#include "fgpac/kernels.hpp"

using namespace fgpac;
using doctest::Approx;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Summation order differs between variants, so compare with a relative tolerance.
void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == Approx(b[i]).epsilon(1e-12).scale(1.0));
}

void check_tables(const kernels::KernelTable& ref, const kernels::KernelTable& alt) {
  // Sizes straddle the vector width and the unroll factor.
  for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 100, 1001}) {
    const auto a = random_vector(n, n + 1);
    const auto b = random_vector(n, n + 2);
    CHECK(alt.dot(a.data(), b.data(), n) == Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12).scale(1.0));
    CHECK(alt.squared_norm(a.data(), n) == Approx(ref.squared_norm(a.data(), n)).epsilon(1e-12));
    auto y1 = b, y2 = b;
    ref.axpy(0.37, a.data(), y1.data(), n);
    alt.axpy(0.37, a.data(), y2.data(), n);
    check_close(y1, y2);
  }
  for (std::size_t rows : {1, 3, 8, 13}) {
    for (std::size_t cols : {1, 4, 7, 16, 37}) {
      const auto a = random_vector(rows * cols, rows * 100 + cols);
      const auto x = random_vector(cols, 7);
      const auto v = random_vector(rows, 8);
      const auto bias = random_vector(rows, 9);
      std::vector<double> y1(rows), y2(rows);
      ref.gemv(a.data(), rows, cols, x.data(), bias.data(), y1.data());
      alt.gemv(a.data(), rows, cols, x.data(), bias.data(), y2.data());
      check_close(y1, y2);
      ref.gemv(a.data(), rows, cols, x.data(), nullptr, y1.data());
      alt.gemv(a.data(), rows, cols, x.data(), nullptr, y2.data());
      check_close(y1, y2);
      std::vector<double> t1 = random_vector(cols, 10), t2 = t1;
      ref.gemv_t_acc(a.data(), rows, cols, v.data(), t1.data());
      alt.gemv_t_acc(a.data(), rows, cols, v.data(), t2.data());
      check_close(t1, t2);
      std::vector<double> m1 = a, m2 = a;
      ref.rank1_acc(m1.data(), rows, cols, -0.4, v.data(), x.data());
      alt.rank1_acc(m2.data(), rows, cols, -0.4, v.data(), x.data());
      check_close(m1, m2);
    }
  }
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar kernels against naive loops") {
    const auto& t = kernels::scalar_table();
    const std::size_t rows = 5, cols = 6;
    const auto a = random_vector(rows * cols, 1);
    const auto x = random_vector(cols, 2);
    const auto v = random_vector(rows, 3);
    std::vector<double> y(rows);
    t.gemv(a.data(), rows, cols, x.data(), nullptr, y.data());
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c] * x[c];
      CHECK(y[r] == Approx(s).epsilon(1e-14));
    }
    std::vector<double> z(cols, 0.0);
    t.gemv_t_acc(a.data(), rows, cols, v.data(), z.data());
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += a[r * cols + c] * v[r];
      CHECK(z[c] == Approx(s).epsilon(1e-14));
    }
  }

#if defined(__x86_64__) || defined(_M_X64)
  TEST_CASE("AVX2 kernels match the scalar reference") {
    if (!kernels::avx2_available()) {
      MESSAGE("AVX2 not available on this CPU; skipping");
      return;
    }
    check_tables(kernels::scalar_table(), kernels::avx2_table());
  }

  TEST_CASE("dispatch can be forced") {
    const kernels::Isa before = kernels::active_isa();
    kernels::set_isa(kernels::Isa::Scalar);
    CHECK(kernels::active_isa() == kernels::Isa::Scalar);
    CHECK(&kernels::table() == &kernels::scalar_table());
    if (kernels::avx2_available()) {
      kernels::set_isa(kernels::Isa::Avx2);
      CHECK(&kernels::table() == &kernels::avx2_table());
    } else {
      CHECK_THROWS(kernels::set_isa(kernels::Isa::Avx2));
    }
    kernels::set_isa(before);
    CHECK(kernels::isa_name(kernels::Isa::Scalar) == "scalar");
  }
#endif
}

#include "fgpac/data.hpp"
#include "fgpac/models.hpp"

TEST_SUITE("kernels") {
  TEST_CASE("model gradients agree across instruction sets") {
    if (!kernels::avx2_available()) return;
    const Dataset data = synth_gaussian_blobs(30, 13, 3, 1.0, 2);
    const ModelShape s = ModelShape::mlp(13, 3, 21, 2, 5.0);
    const std::vector<double> theta = random_vector(s.param_count(), 5);
    auto run = [&](kernels::Isa isa) {
      kernels::set_isa(isa);
      ModelEvaluator ev(s);
      std::vector<double> g(theta.size(), 0.0);
      double total = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) total += ev.loss_and_grad(theta, data.row(i), data.label(i), 1.0, g);
      g.push_back(total);
      return g;
    };
    const kernels::Isa before = kernels::active_isa();
    const auto a = run(kernels::Isa::Scalar);
    const auto b = run(kernels::Isa::Avx2);
    kernels::set_isa(before);
    check_close(a, b);
  }
}

#include <stdexcept>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fgpac/measures.hpp"

using namespace fgpac;
using doctest::Approx;

TEST_SUITE("measures") {
  TEST_CASE("constructors validate") {
    CHECK_THROWS_AS(GaussianMeasure({}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(GaussianMeasure({0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(GaussianMeasure({0.0}, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(GaussianMeasure({std::nan("")}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(DiracMeasure({}), std::invalid_argument);
  }

  TEST_CASE("kl of identical measures is zero") {
    const GaussianMeasure q({1.0, -2.0, 0.5}, 0.7);
    CHECK(kl_gaussian(q, q) == Approx(0.0).epsilon(1e-15));
    CHECK(squared_hellinger(q, q) == Approx(0.0));
    CHECK(tv_upper(q, q) == Approx(0.0));
    CHECK(w2_gaussian(q, q) == Approx(0.0));
  }

  TEST_CASE("kl closed form in one dimension") {
    const GaussianMeasure q({1.0}, 0.5), p({0.0}, 2.0);
    const double want = std::log(2.0 / 0.5) + (0.25 + 1.0) / (2.0 * 4.0) - 0.5;
    CHECK(kl_gaussian(q, p) == Approx(want).epsilon(1e-14));
  }

  TEST_CASE("reverse kl swaps the arguments") {
    const GaussianMeasure q({1.0, 0.0}, 0.5), p({0.0, 1.0}, 2.0);
    CHECK(reverse_kl(q, p) == Approx(kl_gaussian(p, q)).epsilon(1e-14));
  }

  TEST_CASE("dimension mismatch is rejected") {
    const GaussianMeasure a({0.0}, 1.0), b({0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(kl_gaussian(a, b), std::invalid_argument);
    CHECK_THROWS_AS(w2_gaussian(a, b), std::invalid_argument);
    CHECK_THROWS_AS(w1_dirac_to_gaussian(DiracMeasure({0.0}), b), std::invalid_argument);
  }

  TEST_CASE("hellinger lies in [0, 1] and grows with the mean gap") {
    double last = -1.0;
    for (double shift : {0.0, 0.1, 1.0, 5.0, 50.0}) {
      const double h = squared_hellinger(GaussianMeasure({shift, 0.0}, 1.0), GaussianMeasure({0.0, 0.0}, 1.0));
      CHECK(h >= 0.0);
      CHECK(h <= 1.0);
      CHECK(h > last);
      last = h;
    }
  }

  TEST_CASE("tv with equal stds is exact, Pinsker otherwise") {
    const GaussianMeasure q({1.0}, 1.0), p({0.0}, 1.0);
    CHECK(tv_upper(q, p) == Approx(std::erf(1.0 / (2.0 * std::numbers::sqrt2))).epsilon(1e-14));
    const GaussianMeasure r({0.0}, 1.5);
    CHECK(tv_upper(q, r) == Approx(std::min(1.0, std::sqrt(0.5 * kl_gaussian(q, r)))).epsilon(1e-14));
    CHECK(tv_upper(GaussianMeasure({100.0}, 1.0), GaussianMeasure({0.0}, 0.01)) == 1.0);
  }

  TEST_CASE("chi mean matches small cases and the large-d limit") {
    CHECK(chi_mean(1) == Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-14));
    CHECK(chi_mean(2) == Approx(std::sqrt(std::numbers::pi / 2.0)).epsilon(1e-14));
    CHECK(chi_mean(3) == Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-14));
    CHECK(chi_mean(1000000) == Approx(1000.0).epsilon(1e-6));
  }

  TEST_CASE("w1 to a Gaussian: mean gap plus the noise norm bound") {
    const DiracMeasure rho({3.0, 4.0});
    const GaussianMeasure eta({0.0, 0.0}, 0.2);
    const double w1 = w1_dirac_to_gaussian(rho, eta);
    CHECK(w1 >= 5.0);
    CHECK(w1 <= 5.0 + 0.2 * chi_mean(2) + 1e-12);
  }

  TEST_CASE("w2 between isotropic Gaussians") {
    const GaussianMeasure a({1.0, 2.0, 3.0}, 0.5), b({1.0, 2.0, 4.0}, 0.2);
    CHECK(w2_gaussian(a, b) == Approx(std::sqrt(1.0 + 3.0 * 0.09)).epsilon(1e-14));
  }

  TEST_CASE("templated forms agree with the measure API") {
    const GaussianMeasure q({0.3, -0.2}, 0.4), p({0.0, 0.1}, 0.9);
    const double dist = (0.3 * 0.3) + (0.3 * 0.3);
    CHECK(iso::kl(2.0, dist, 0.16, 0.81) == Approx(kl_gaussian(q, p)).epsilon(1e-14));
    CHECK(iso::squared_hellinger(2.0, dist, 0.16, 0.81) == Approx(squared_hellinger(q, p)).epsilon(1e-14));
  }
}

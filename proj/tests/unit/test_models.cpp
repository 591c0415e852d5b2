#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fgpac/data.hpp"
#include "fgpac/models.hpp"

using namespace fgpac;
using doctest::Approx;

namespace {

std::vector<double> gaussian_vector(std::size_t d, double s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, s);
  std::vector<double> v(d);
  for (double& x : v) x = z(rng);
  return v;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("parameter counts") {
    CHECK(ModelShape::linear(5, 3).param_count() == 18);
    // W (3x4), W_2 (4x4), W_1 (4x5), b (3), b_2 (4), b_1 (4)
    CHECK(ModelShape::mlp(5, 3, 4, 2).param_count() == 12 + 16 + 20 + 3 + 4 + 4);
    CHECK_THROWS_AS(ModelShape::linear(0, 3).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ModelShape::mlp(5, 1, 4, 1).validate(), std::invalid_argument);
  }

  TEST_CASE("layer slots tile the flat vector") {
    const ModelShape s = ModelShape::mlp(5, 3, 4, 2);
    const auto slots = layer_slots(s);
    REQUIRE(slots.size() == 3);
    std::vector<int> hits(s.param_count(), 0);
    for (const auto& l : slots) {
      for (std::size_t i = 0; i < l.rows * l.cols; ++i) ++hits[l.weight_offset + i];
      for (std::size_t i = 0; i < l.rows; ++i) ++hits[l.bias_offset + i];
    }
    for (int h : hits) CHECK(h == 1);
    // Output weights lead the vector, first-layer biases close it.
    CHECK(slots.back().weight_offset == 0);
    CHECK(slots.front().bias_offset + slots.front().rows == s.param_count());
  }

  TEST_CASE("pack inverts unpack") {
    const ModelShape s = ModelShape::mlp(6, 4, 5, 3);
    const ModelParams p(s, gaussian_vector(s.param_count(), 1.0, 3));
    CHECK(pack(s, unpack(p)).theta == p.theta);
  }

  TEST_CASE("initialisation") {
    const ModelShape lin = ModelShape::linear(7, 3);
    for (double v : init_linear(lin).theta) CHECK(v == 0.0);
    const ModelShape mlp = ModelShape::mlp(7, 3, 50, 2);
    const ModelParams p = init_mlp(mlp, 1);
    const auto layers = unpack(p);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      for (double w : layers[k].weight) CHECK(std::abs(w) <= 0.08);
      for (double b : layers[k].bias) CHECK(b == (k == 0 ? 0.1 : 0.0));
    }
    CHECK(init_mlp(mlp, 1).theta == p.theta);
    CHECK(init_mlp(mlp, 2).theta != p.theta);
  }

  TEST_CASE("margin loss") {
    const std::vector<double> s = {2.0, 1.0, 0.0};
    // alpha 1: the hinge terms are (1 - 1)_+ and (1 - 2)_+.
    CHECK(margin_loss(s, 0, 1.0) == Approx(0.0));
    CHECK(margin_loss(s, 2, 1.0) == Approx(1.0));  // clamped from (3 + 2) / 3
    CHECK(margin_loss(s, 1, 0.5) == Approx((1.5 + 0.5) / 3.0));
    for (int y = 0; y < 3; ++y) {
      const double l = margin_loss(s, y, 25.0);
      CHECK(l >= 0.0);
      CHECK(l <= 1.0);
    }
  }

  TEST_CASE("loss is Lipschitz in the parameters with the stated constant") {
    const Dataset data = synth_gaussian_blobs(50, 6, 3, 1.0, 5);
    for (const ModelShape& s : {ModelShape::linear(6, 3, 4.0), ModelShape::mlp(6, 3, 8, 2, 4.0)}) {
      const double lip = loss_lipschitz_const(s);
      double worst = 0.0;
      for (int t = 0; t < 200; ++t) {
        std::vector<double> a = gaussian_vector(s.param_count(), 0.5, 100 + t);
        std::vector<double> b = a;
        const std::vector<double> step = gaussian_vector(s.param_count(), 0.05, 900 + t);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += step[i];
        if (s.kind == ModelKind::Mlp) {
          project_weights_frobenius(s, a);
          project_weights_frobenius(s, b);
        }
        std::vector<double> diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        for (std::size_t i = 0; i < data.size(); ++i) {
          const double la = margin_loss(predict(ModelParams(s, a), data.row(i)), data.label(i), s.margin_scale);
          const double lb = margin_loss(predict(ModelParams(s, b), data.row(i)), data.label(i), s.margin_scale);
          worst = std::max(worst, std::abs(la - lb) / norm(diff));
        }
      }
      CHECK(worst <= lip);
    }
  }

  TEST_CASE("Frobenius projection") {
    const ModelShape s = ModelShape::mlp(4, 2, 6, 2);
    std::vector<double> theta = gaussian_vector(s.param_count(), 3.0, 8);
    const std::vector<double> before = theta;
    CHECK_FALSE(weights_within_unit_frobenius(s, theta));
    project_weights_frobenius(s, theta);
    CHECK(weights_within_unit_frobenius(s, theta));
    // Biases are untouched.
    const auto slots = layer_slots(s);
    for (std::size_t i = slots.back().bias_offset; i < theta.size(); ++i) CHECK(theta[i] == before[i]);
  }

  TEST_CASE("evaluator agrees with predict and empirical_risk") {
    const Dataset data = synth_gaussian_blobs(40, 5, 3, 1.0, 9);
    const ModelShape s = ModelShape::mlp(5, 3, 7, 1, 10.0);
    const ModelParams p(s, gaussian_vector(s.param_count(), 0.3, 4));
    ModelEvaluator ev(s);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto sc = ev.scores(p.theta, data.row(i));
      const auto pr = predict(p, data.row(i));
      for (std::size_t k = 0; k < pr.size(); ++k) CHECK(sc[k] == Approx(pr[k]).epsilon(1e-14));
      total += ev.loss(p.theta, data.row(i), data.label(i));
    }
    CHECK(empirical_risk(p, data) == Approx(total / static_cast<double>(data.size())).epsilon(1e-14));
  }

  TEST_CASE("hidden activations stay in the unit ball") {
    const ModelShape s = ModelShape::mlp(5, 3, 9, 3);
    ModelEvaluator ev(s);
    const std::vector<double> theta = gaussian_vector(s.param_count(), 2.0, 6);
    const std::vector<double> x = {0.4, -0.3, 0.2, 0.1, 0.5};
    ev.scores(theta, x);
    for (std::size_t k = 0; k < 3; ++k) {
      double sq = 0.0;
      for (double h : ev.hidden(k)) sq += h * h;
      CHECK(sq <= 1.0 + 1e-12);
    }
  }
}

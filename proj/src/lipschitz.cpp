#include "fgpac/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "fgpac/cocob.hpp"
#include "fgpac/kernels.hpp"

namespace fgpac {
namespace {

constexpr double kMinSeparation = 1e-8;

void check_inputs(const Dataset& data, const RademacherSigns& eps) {
  if (data.size() == 0) throw std::invalid_argument("surrogate needs a nonempty dataset");
  if (eps.size() != data.size()) {
    throw std::invalid_argument("sign vector has " + std::to_string(eps.size()) +
                                " entries for " + std::to_string(data.size()) + " examples");
  }
}

std::vector<double> losses(ModelEvaluator& ev, std::span<const double> theta, const Dataset& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = ev.loss(theta, data.row(i), data.label(i));
  return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("parameter dimension mismatch");
  std::vector<double> diff(a.begin(), a.end());
  kernels::axpy(-1.0, b, diff);
  return std::sqrt(kernels::squared_norm(diff));
}

double ratio_from_losses(const std::vector<double>& lw, const std::vector<double>& lw_prime,
                         const RademacherSigns& eps, double dist) {
  double sum = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) sum += eps.eps[i] * (lw_prime[i] - lw[i]);
  return sum / static_cast<double>(lw.size()) / dist;
}

struct PairScore {
  double value = 0.0;
  std::size_t first = 0;
  std::size_t second = 0;
  bool found = false;
};

// Best ordered pair among `points`, with identical points skipped.
PairScore best_pair(std::span<const std::vector<double>> points, const ModelShape& shape,
                    const Dataset& data, const RademacherSigns& eps) {
  ModelEvaluator ev(shape);
  std::vector<std::vector<double>> loss_table;
  loss_table.reserve(points.size());
  for (const auto& p : points) loss_table.push_back(losses(ev, p, data));

  PairScore best;
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = 0; b < points.size(); ++b) {
      if (a == b) continue;
      const double dist = distance(points[a], points[b]);
      if (dist == 0.0) continue;
      const double r = ratio_from_losses(loss_table[a], loss_table[b], eps, dist);
      if (!best.found || r > best.value) best = {r, a, b, true};
    }
  }
  return best;
}

std::vector<double> draw_init(const ModelShape& shape, std::mt19937_64& rng) {
  if (shape.kind == ModelKind::Linear) return init_linear(shape).theta;
  return init_mlp(shape, rng()).theta;
}

void perturb(std::vector<double>& v, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, scale);
  for (double& x : v) x += noise(rng);
}

}  // namespace

RademacherSigns sample_rademacher(std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("need at least one Rademacher sign");
  RademacherSigns out;
  out.seed = seed;
  out.eps.resize(m);
  std::mt19937_64 rng(seed);
  for (int& e : out.eps) e = (rng() >> 63) ? 1 : -1;
  return out;
}

double surrogate_ratio(std::span<const double> w, std::span<const double> w_prime,
                       const ModelShape& shape, const Dataset& data, const RademacherSigns& eps) {
  check_inputs(data, eps);
  const double dist = distance(w, w_prime);
  if (dist == 0.0) throw std::invalid_argument("surrogate ratio undefined for w == w'");
  ModelEvaluator ev(shape);
  return ratio_from_losses(losses(ev, w, data), losses(ev, w_prime, data), eps, dist);
}

double brute_force_surrogate(std::span<const std::vector<double>> candidates,
                             const ModelShape& shape, const Dataset& data,
                             const RademacherSigns& eps) {
  check_inputs(data, eps);
  const PairScore best = best_pair(candidates, shape, data, eps);
  if (!best.found) throw std::invalid_argument("brute force needs at least two distinct candidates");
  return best.value;
}

double brute_force_surrogate(std::span<const ModelParams> candidates, const Dataset& data,
                             const RademacherSigns& eps) {
  if (candidates.empty()) throw std::invalid_argument("brute force needs candidates");
  std::vector<std::vector<double>> thetas;
  for (const auto& c : candidates) {
    if (!(c.shape == candidates.front().shape)) throw std::invalid_argument("candidate shapes differ");
    thetas.push_back(c.theta);
  }
  return brute_force_surrogate(thetas, candidates.front().shape, data, eps);
}

SurrogateResult maximize_surrogate(const Dataset& data, const RademacherSigns& eps,
                                   const ModelShape& shape, const SurrogateConfig& cfg,
                                   std::span<const std::vector<double>> seeds) {
  check_inputs(data, eps);
  shape.validate();
  if (cfg.iterations < 1 && !cfg.restrict_to_seeds) {
    throw std::invalid_argument("surrogate ascent needs at least one iteration");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const std::size_t d = shape.param_count();
  for (const auto& s : seeds) {
    if (s.size() != d) throw std::invalid_argument("seed point has the wrong dimension");
  }

  SurrogateResult result;
  bool have_best = false;
  auto record = [&](double value, std::span<const double> w, std::span<const double> w_prime) {
    if (!have_best || value > result.value) {
      result.value = value;
      result.best_w.assign(w.begin(), w.end());
      result.best_w_prime.assign(w_prime.begin(), w_prime.end());
      have_best = true;
    }
  };

  std::vector<double> start_w, start_w_prime;
  if (seeds.size() >= 2) {
    const PairScore seeded = best_pair(seeds, shape, data, eps);
    if (seeded.found) {
      record(seeded.value, seeds[seeded.first], seeds[seeded.second]);
      start_w = seeds[seeded.first];
      start_w_prime = seeds[seeded.second];
    }
    if (cfg.keep_visited) result.visited.assign(seeds.begin(), seeds.end());
    result.trace.emplace_back(0, result.value);
  }
  if (cfg.restrict_to_seeds) {
    if (!have_best) throw std::invalid_argument("finite mode needs at least two distinct seed points");
    return result;
  }

  const std::size_t m = data.size();
  const std::size_t batch = std::min(cfg.batch_size, m);
  ModelEvaluator ev(shape);
  std::vector<double> z(2 * d), grad(2 * d), diff(d);
  std::vector<std::size_t> order(m);
  std::size_t global_iter = 0;

  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (r + 1));
    std::vector<double> w, w_prime;
    if (r == 0 && !start_w.empty()) {
      w = start_w;
      w_prime = start_w_prime;
    } else {
      w = draw_init(shape, rng);
      w_prime = draw_init(shape, rng);
      perturb(w, cfg.init_perturbation, rng);
      perturb(w_prime, cfg.init_perturbation, rng);
    }
    // Orient the pair so the ascent starts from a nonnegative ratio.
    double full = surrogate_ratio(w, w_prime, shape, data, eps);
    if (full < 0.0) {
      std::swap(w, w_prime);
      full = -full;
    }
    record(full, w, w_prime);
    if (cfg.keep_visited) {
      result.visited.push_back(w);
      result.visited.push_back(w_prime);
    }

    std::copy(w.begin(), w.end(), z.begin());
    std::copy(w_prime.begin(), w_prime.end(), z.begin() + static_cast<std::ptrdiff_t>(d));
    CocobOptimizer opt(z, cfg.cocob_alpha);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
      ++global_iter;
      std::span<double> zw(z.data(), d);
      std::span<double> zw2(z.data() + d, d);
      for (std::size_t j = 0; j < d; ++j) diff[j] = zw[j] - zw2[j];
      double dist = std::sqrt(kernels::squared_norm(diff));
      if (dist < kMinSeparation) {
        std::vector<double> bump(zw2.begin(), zw2.end());
        perturb(bump, cfg.init_perturbation, rng);
        std::copy(bump.begin(), bump.end(), zw2.begin());
        for (std::size_t j = 0; j < d; ++j) diff[j] = zw[j] - zw2[j];
        dist = std::sqrt(kernels::squared_norm(diff));
        if (dist < kMinSeparation) continue;
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      std::span<double> gw(grad.data(), d);
      std::span<double> gw2(grad.data() + d, d);
      double numer = 0.0;
      const double inv_b = 1.0 / static_cast<double>(batch);
      for (std::size_t k = 0; k < batch; ++k) {
        if (cursor == m) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        const std::size_t i = order[cursor++];
        const double e = eps.eps[i] * inv_b;
        numer += e * ev.loss_and_grad(zw2, data.row(i), data.label(i), e, gw2);
        numer -= e * ev.loss_and_grad(zw, data.row(i), data.label(i), -e, gw);
      }
      // F = N / D; descend on -F.
      const double inv_d = 1.0 / dist;
      const double coef = numer * inv_d * inv_d * inv_d;
      for (std::size_t j = 0; j < d; ++j) {
        const double gw_j = gw[j] * inv_d - coef * diff[j];
        const double gw2_j = gw2[j] * inv_d + coef * diff[j];
        gw[j] = -gw_j;
        gw2[j] = -gw2_j;
      }
      opt.step(z, grad);

      if (it % std::max<std::size_t>(cfg.checkpoint_every, 1) == 0 || it == cfg.iterations) {
        std::span<const double> cw(z.data(), d);
        std::span<const double> cw2(z.data() + d, d);
        if (distance(cw, cw2) == 0.0) continue;
        const double r_full = surrogate_ratio(cw, cw2, shape, data, eps);
        if (r_full >= 0.0) {
          record(r_full, cw, cw2);
        } else {
          record(-r_full, cw2, cw);
        }
        if (cfg.keep_visited) {
          result.visited.emplace_back(cw.begin(), cw.end());
          result.visited.emplace_back(cw2.begin(), cw2.end());
        }
        result.trace.emplace_back(global_iter, result.value);
      }
    }
  }
  result.value = std::max(result.value, 0.0);
  return result;
}

LipschitzEstimate lipschitz_constant(double surrogate, double loss_lip, std::size_t m,
                                     double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (m < 1) throw std::invalid_argument("sample size must be >= 1");
  if (!(surrogate >= 0.0)) throw std::invalid_argument("surrogate must be nonnegative");
  if (!(loss_lip >= 0.0)) throw std::invalid_argument("loss Lipschitz constant must be nonnegative");
  LipschitzEstimate est;
  est.surrogate = surrogate;
  est.loss_lip = loss_lip;
  est.m = m;
  est.delta = delta;
  est.value = 2.0 * surrogate +
              3.0 * loss_lip * std::sqrt(2.0 * std::log(4.0 / delta) / static_cast<double>(m));
  return est;
}

double lipschitz_for_squared_gap(const LipschitzEstimate& est, double gap_bound) {
  if (!(gap_bound > 0.0 && gap_bound <= 1.0)) {
    throw std::invalid_argument("gap bound must lie in (0, 1]");
  }
  return 2.0 * gap_bound * est.value;
}

}  // namespace fgpac

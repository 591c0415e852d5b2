#pragma once

// High-probability Lipschitz constant of the generalisation gap, assembled from
// an empirical Rademacher surrogate
//
//   R = sup_{w != w'} (1/m) sum_i eps_i (l(w', z_i) - l(w, z_i)) / ||w - w'||
//
// which is estimated by stochastic ascent over pairs (w, w').

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fgpac/data.hpp"
#include "fgpac/models.hpp"

namespace fgpac {

struct RademacherSigns {
  std::vector<int> eps;
  std::uint64_t seed = 0;
  std::size_t size() const { return eps.size(); }
};

RademacherSigns sample_rademacher(std::size_t m, std::uint64_t seed);

struct LipschitzEstimate {
  double surrogate = 0.0;
  double loss_lip = 0.0;
  std::size_t m = 0;
  double delta = 0.0;
  double value = 0.0;
  std::vector<std::pair<std::size_t, double>> trace;
};

struct SurrogateConfig {
  std::size_t restarts = 5;
  std::size_t iterations = 2000;
  std::size_t batch_size = 256;
  /// Full-sample scoring cadence during ascent (the final iterate is always scored).
  std::size_t checkpoint_every = 100;
  double cocob_alpha = 10.0;
  /// Std of the Gaussian perturbation that separates the two starting points.
  double init_perturbation = 1e-2;
  std::uint64_t seed = 0;
  /// Score only the pairs among the seed points, without ascent.
  bool restrict_to_seeds = false;
  /// Record every scored parameter vector (for tests).
  bool keep_visited = false;
};

struct SurrogateResult {
  double value = 0.0;
  std::vector<double> best_w;
  std::vector<double> best_w_prime;
  std::vector<std::pair<std::size_t, double>> trace;
  std::vector<std::vector<double>> visited;
};

/// Signed full-sample ratio for the ordered pair (w, w'). Throws when w == w'.
double surrogate_ratio(std::span<const double> w, std::span<const double> w_prime,
                       const ModelShape& shape, const Dataset& data, const RademacherSigns& eps);

/// Best full-sample ratio (over both orderings) found by the ascent. When
/// `seeds` has at least two entries, every ordered seed pair is scored first
/// and the best one becomes the starting pair of the first restart.
SurrogateResult maximize_surrogate(const Dataset& data, const RademacherSigns& eps,
                                   const ModelShape& shape, const SurrogateConfig& cfg,
                                   std::span<const std::vector<double>> seeds = {});

/// Exact maximum of the ratio over ordered pairs of distinct candidates.
double brute_force_surrogate(std::span<const ModelParams> candidates, const Dataset& data,
                             const RademacherSigns& eps);
double brute_force_surrogate(std::span<const std::vector<double>> candidates,
                             const ModelShape& shape, const Dataset& data,
                             const RademacherSigns& eps);

/// value = 2 surrogate + 3 loss_lip sqrt(2 ln(4/delta) / m).
LipschitzEstimate lipschitz_constant(double surrogate, double loss_lip, std::size_t m,
                                     double delta);

/// Constant for the squared gap: |a^2 - b^2| <= (|a| + |b|) |a - b| <= 2 gap_bound |a - b|.
double lipschitz_for_squared_gap(const LipschitzEstimate& est, double gap_bound = 1.0);

}  // namespace fgpac

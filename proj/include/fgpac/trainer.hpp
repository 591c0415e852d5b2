#pragma once

// Bound-minimisation training: the empirical risk of the posterior plus the
// gap term of a certificate family, minimised jointly over the weights, the
// posterior (or eta) std, the interpolation weight lambda and the prior std
// with COCOB-Backprop.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fgpac/bounds.hpp"
#include "fgpac/data.hpp"
#include "fgpac/lipschitz.hpp"
#include "fgpac/measures.hpp"
#include "fgpac/models.hpp"

namespace fgpac {

struct TrainConfig {
  ModelShape shape;
  PosteriorKind posterior_kind = PosteriorKind::Dirac;
  BoundFamily objective = BoundFamily::KlWasserstein;
  double delta = 0.05;
  std::size_t batch_size = 256;
  std::size_t min_iterations = 10000;
  double cocob_alpha = 10.0;
  std::uint64_t seed = 0;
  double lambda_init = 0.5;
  /// Posterior std (Gaussian) or the free eta std (Dirac).
  double sigma_init = 0.1;
  /// Prior mean (empty: zeros) and initial prior std.
  std::vector<double> prior_mean;
  double prior_std = 0.1;
  /// The prior std is optimised freely and snapped to the grid when certifying.
  bool learn_prior_std = true;
  PriorGrid prior_grid;
  /// Checkpoints the prior mean was selected from (0: data-free prior).
  std::size_t prior_epochs = 0;
  LipschitzEstimate lipschitz;
  /// Rescale weight matrices into the unit Frobenius ball after every step.
  bool frobenius_projection = false;
  /// Re-pick lambda on the exact certificate after training.
  bool refine_lambda = true;
  std::size_t mc_samples = 1000;
  bool strict_hoeffding = false;
  /// ERM epochs when training a data-dependent prior.
  std::size_t erm_epochs = 10;

  std::filesystem::path log_path;
  std::size_t log_every = 100;
  std::filesystem::path checkpoint_path;
  std::size_t checkpoint_every = 0;
};

struct TrainableState {
  std::vector<double> theta;
  double log_sigma = 0.0;
  double lambda_logit = 0.0;
  double log_prior_sigma = 0.0;

  double sigma() const;
  double lambda() const;
  double prior_sigma() const;

  /// [theta, log_sigma, lambda_logit, log_prior_sigma]
  std::vector<double> flatten() const;
  static TrainableState unflatten(std::span<const double> z);
};

double sigmoid(double x);
double logit(double p);

/// Trainable families: kl-wass, mcallester (Gaussian posterior), reverse-kl, hellinger, tv.
bool is_trainable(BoundFamily family, PosteriorKind kind);

GaussianMeasure eta_from_state(const TrainableState& state, const GaussianMeasure& prior,
                               PosteriorKind kind);

struct ObjectiveResult {
  double value = 0.0;
  double risk = 0.0;
  double gap = 0.0;
  /// Gradient over TrainableState::flatten() coordinates.
  std::vector<double> grad;
  /// Smallest distance to a kink over the batch (see ModelEvaluator::kink_margin).
  double kink_margin = 0.0;
};

/// Batch objective. `noise` holds the standard normal draw for the Gaussian
/// reparametrisation (ignored for Dirac posteriors); `m` is the certificate
/// sample size.
ObjectiveResult objective_and_grad(const TrainableState& state, const Dataset& data,
                                   std::span<const std::size_t> batch, const TrainConfig& cfg,
                                   std::size_t m, std::span<const double> noise = {});

struct TrajectoryPoint {
  std::size_t iteration = 0;
  double objective = 0.0;
  double risk = 0.0;
  double gap = 0.0;
};

struct TrainResult {
  TrainableState state;
  PosteriorMeasure posterior;
  GaussianMeasure prior;
  GaussianMeasure eta;
  double eta_lambda = 1.0;
  BoundReport report;
  std::vector<TrajectoryPoint> trajectory;
  std::size_t iterations = 0;
  std::size_t epochs = 0;
};

/// Trains on `data` (the certification set) and certifies the result on it.
TrainResult train(const Dataset& data, const TrainConfig& cfg);

struct ErmPrior {
  std::vector<double> mean;
  /// Number of per-epoch checkpoints the mean was picked from.
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  Dataset prior_set;
  Dataset cert_set;
};

/// ERM on a `fraction` split of `full_train`, early-stopped on the empirical
/// risk of the remaining certification split.
ErmPrior train_erm_prior(const Dataset& full_train, double fraction, const TrainConfig& cfg);

}  // namespace fgpac

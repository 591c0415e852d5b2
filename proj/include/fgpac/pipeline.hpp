#pragma once

// End-to-end experiment: load a benchmark, split it, estimate the Lipschitz
// constant, train by bound minimisation and certify, then measure the test
// risk. Shared by the command-line tool and the acceptance checks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fgpac/bounds.hpp"
#include "fgpac/data.hpp"
#include "fgpac/lipschitz.hpp"
#include "fgpac/models.hpp"
#include "fgpac/trainer.hpp"

namespace fgpac {

struct DatasetSpec {
  std::string name;
  /// Sparse text file, or IDX image and label files for train and test.
  std::vector<std::string> files;
  std::size_t features = 0;
  bool idx = false;
};

/// mushrooms, yeast, phishing, mnist, fashion-mnist.
const std::vector<DatasetSpec>& known_datasets();
const DatasetSpec& dataset_spec(const std::string& name);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Loads `name` from `dir`: IDX sets keep their own test split, sparse sets are
/// split 50/50 with `seed`. Throws std::runtime_error naming the missing file.
TrainTestSplit load_benchmark(const std::string& name, const std::filesystem::path& dir,
                              std::uint64_t seed);

struct ExperimentConfig {
  ModelKind model = ModelKind::Linear;
  std::size_t hidden_width = 600;
  std::size_t depth = 1;
  /// Margin scale; 0 picks 25 (linear) or 250 (mlp).
  double alpha = 0.0;
  PosteriorKind posterior = PosteriorKind::Dirac;
  BoundFamily family = BoundFamily::KlWasserstein;
  double delta = 0.05;
  std::uint64_t seed = 0;
  /// Learn the prior mean by ERM on this fraction of the training set (0: zeros).
  double prior_fraction = 0.0;
  std::size_t batch_size = 256;
  std::size_t min_iterations = 10000;
  double cocob_alpha = 10.0;
  double lambda_init = 0.5;
  double sigma_init = 0.1;
  double prior_std = 0.1;
  bool learn_prior_std = true;
  bool frobenius_projection = false;
  std::size_t mc_samples = 1000;
  bool strict_hoeffding = false;
  std::size_t erm_epochs = 10;
  SurrogateConfig surrogate;
  std::filesystem::path log_path;
  std::filesystem::path checkpoint_path;
  std::size_t checkpoint_every = 0;
};

ModelShape experiment_shape(const ExperimentConfig& cfg, std::size_t input_dim, int class_count);

struct ExperimentResult {
  TrainResult trained;
  LipschitzEstimate lipschitz;
  /// Risk on the held-out test split (mean over posterior draws for a Gaussian posterior).
  double test_risk = 0.0;
  /// Certificate sample size and the prior split size (0 with a data-free prior).
  std::size_t cert_size = 0;
  std::size_t prior_size = 0;
  ModelShape shape;
};

/// The Lipschitz surrogate is maximised on `full_train` (the whole training
/// set, also when part of it trains the prior).
ExperimentResult run_experiment(const Dataset& full_train, const Dataset& test,
                                const ExperimentConfig& cfg);

/// Risk of a posterior on `data`: exact for a Dirac, a `samples`-draw average otherwise.
double posterior_risk(const PosteriorMeasure& posterior, const ModelShape& shape,
                      const Dataset& data, std::size_t samples, std::uint64_t seed);

}  // namespace fgpac

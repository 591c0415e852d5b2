#include "fgpac/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace fgpac {

const std::vector<DatasetSpec>& known_datasets() {
  static const std::vector<DatasetSpec> specs = {
      {"mushrooms", {"mushrooms"}, 98, false},
      {"yeast", {"yeast"}, 8, false},
      {"phishing", {"phishing"}, 68, false},
      {"mnist",
       {"mnist/train-images-idx3-ubyte", "mnist/train-labels-idx1-ubyte",
        "mnist/t10k-images-idx3-ubyte", "mnist/t10k-labels-idx1-ubyte"},
       784, true},
      {"fashion-mnist",
       {"fashion-mnist/train-images-idx3-ubyte", "fashion-mnist/train-labels-idx1-ubyte",
        "fashion-mnist/t10k-images-idx3-ubyte", "fashion-mnist/t10k-labels-idx1-ubyte"},
       784, true},
  };
  return specs;
}

const DatasetSpec& dataset_spec(const std::string& name) {
  for (const auto& s : known_datasets()) {
    if (s.name == name) return s;
  }
  std::string names;
  for (const auto& s : known_datasets()) names += (names.empty() ? "" : ", ") + s.name;
  throw std::invalid_argument("unknown dataset '" + name + "' (known: " + names + ")");
}

TrainTestSplit load_benchmark(const std::string& name, const std::filesystem::path& dir,
                              std::uint64_t seed) {
  const DatasetSpec& spec = dataset_spec(name);
  for (const auto& f : spec.files) {
    if (!std::filesystem::exists(dir / f)) {
      throw std::runtime_error("dataset file " + (dir / f).string() + " not found");
    }
  }
  if (spec.idx) {
    return {load_idx(dir / spec.files[0], dir / spec.files[1]),
            load_idx(dir / spec.files[2], dir / spec.files[3])};
  }
  const Dataset full = load_sparse_text(dir / spec.files[0], spec.features);
  SplitPair halves = split_half(full, seed);
  return {std::move(halves.first), std::move(halves.second)};
}

ModelShape experiment_shape(const ExperimentConfig& cfg, std::size_t input_dim, int class_count) {
  if (cfg.model == ModelKind::Linear) {
    return ModelShape::linear(input_dim, class_count, cfg.alpha > 0.0 ? cfg.alpha : 25.0);
  }
  return ModelShape::mlp(input_dim, class_count, cfg.hidden_width, cfg.depth,
                         cfg.alpha > 0.0 ? cfg.alpha : 250.0);
}

double posterior_risk(const PosteriorMeasure& posterior, const ModelShape& shape,
                      const Dataset& data, std::size_t samples, std::uint64_t seed) {
  if (is_dirac(posterior)) return mc_expected_risk(posterior, shape, data, 0, 0.5, seed).mean;
  return mc_expected_risk(posterior, shape, data, samples, 0.5, seed).mean;
}

ExperimentResult run_experiment(const Dataset& full_train, const Dataset& test,
                                const ExperimentConfig& cfg) {
  if (full_train.cols() != test.cols()) throw std::invalid_argument("train and test widths differ");
  const int classes = std::max(full_train.class_count(), test.class_count());
  const ModelShape shape = experiment_shape(cfg, full_train.cols(), classes);

  TrainConfig tc;
  tc.shape = shape;
  tc.posterior_kind = cfg.posterior;
  tc.objective = cfg.family;
  tc.delta = cfg.delta;
  tc.batch_size = cfg.batch_size;
  tc.min_iterations = cfg.min_iterations;
  tc.cocob_alpha = cfg.cocob_alpha;
  tc.seed = cfg.seed;
  tc.lambda_init = cfg.lambda_init;
  tc.sigma_init = cfg.sigma_init;
  tc.prior_std = cfg.prior_std;
  tc.learn_prior_std = cfg.learn_prior_std;
  tc.frobenius_projection = cfg.frobenius_projection;
  tc.mc_samples = cfg.mc_samples;
  tc.strict_hoeffding = cfg.strict_hoeffding;
  tc.erm_epochs = cfg.erm_epochs;
  tc.log_path = cfg.log_path;
  tc.checkpoint_path = cfg.checkpoint_path;
  tc.checkpoint_every = cfg.checkpoint_every;

  // The Lipschitz event gets its share of the same ledger the certificate uses.
  const auto ledger = compose_delta_budget(cfg.delta, cfg.family, cfg.posterior,
                                           family_uses_wasserstein(cfg.family),
                                           cfg.posterior == PosteriorKind::Gaussian);
  if (family_uses_wasserstein(cfg.family)) {
    SurrogateConfig sc = cfg.surrogate;
    sc.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    const RademacherSigns eps = sample_rademacher(full_train.size(), sc.seed);
    const SurrogateResult sr = maximize_surrogate(full_train, eps, shape, sc);
    tc.lipschitz = lipschitz_constant(sr.value, loss_lipschitz_const(shape), full_train.size(),
                                      ledger_share(ledger, "lipschitz"));
    tc.lipschitz.trace = sr.trace;
  } else {
    tc.lipschitz = lipschitz_constant(0.0, loss_lipschitz_const(shape), full_train.size(), cfg.delta);
  }

  const Dataset* cert = &full_train;
  std::optional<ErmPrior> erm;
  if (cfg.prior_fraction > 0.0) {
    erm = train_erm_prior(full_train, cfg.prior_fraction, tc);
    tc.prior_mean = erm->mean;
    tc.prior_epochs = erm->epochs;
    cert = &erm->cert_set;
  }

  ExperimentResult out{train(*cert, tc), tc.lipschitz, 0.0, cert->size(),
                       erm ? erm->prior_set.size() : 0, shape};
  out.test_risk = posterior_risk(out.trained.posterior, shape, test, cfg.mc_samples,
                                 cfg.seed ^ 0x85ebca6bULL);
  BoundReport& r = out.trained.report;
  r.provenance["train_fingerprint"] = std::to_string(full_train.fingerprint());
  r.provenance["lipschitz_seed"] = std::to_string(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  if (erm) {
    r.terms["prior_best_epoch"] = static_cast<double>(erm->best_epoch);
    r.terms["prior_set_size"] = static_cast<double>(out.prior_size);
  }
  return out;
}

}  // namespace fgpac

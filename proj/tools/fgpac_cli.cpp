// fgpac: train and certify PAC-Bayes classifiers from the command line.
//
//   fgpac train      --dataset mushrooms --model linear --posterior dirac --bound kl-wass
//   fgpac certify    --checkpoint run.ckpt --dataset mushrooms --bound catoni
//   fgpac lipschitz  --dataset yeast --restarts 5 --iterations 2000
//   fgpac student    --alpha-stable 1.8 --d 1000 --sigma 0.01 --m 5000 --lip 2
//   fgpac reproduce  table1a-mushrooms
//
// Exit codes: 0 report written, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fgpac/bounds.hpp"
#include "fgpac/checkpoint.hpp"
#include "fgpac/kernels.hpp"
#include "fgpac/pipeline.hpp"
#include "fgpac/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fgpac;

namespace {

/// Bad flags or inputs the user can fix; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string data_dir;
  std::string out;
  bool dry_run = false;
};

struct ModelFlags {
  std::string model = "linear";
  std::size_t hidden = 600;
  std::size_t depth = 1;
  double alpha = 0.0;
};

struct LipFlags {
  std::size_t restarts = 5;
  std::size_t iterations = 2000;
  std::size_t batch = 256;
  std::size_t checkpoint_every = 100;
};

struct TrainFlags {
  std::string dataset;
  ModelFlags model;
  std::string posterior = "dirac";
  std::string bound = "kl-wass";
  double delta = 0.05;
  std::uint64_t seed = 0;
  double prior_fraction = 0.0;
  std::size_t iterations = 10000;
  std::size_t batch = 256;
  double cocob = 10.0;
  double lambda_init = 0.5;
  double sigma_init = 0.1;
  double prior_std = 0.1;
  bool fixed_prior_std = false;
  bool frobenius = false;
  std::size_t mc_samples = 1000;
  bool strict_hoeffding = false;
  std::size_t erm_epochs = 10;
  LipFlags lip;
  std::string log;
  std::string checkpoint;
  std::size_t checkpoint_every = 0;
};

struct CertifyFlags {
  std::string checkpoint;
  std::string dataset;
  std::string bound = "kl-wass";
  double delta = 0.05;
  std::uint64_t seed = 0;
  double prior_fraction = 0.0;
  std::string lipschitz_file;
  LipFlags lip;
  std::size_t mc_samples = 1000;
  bool strict_hoeffding = false;
  std::optional<double> eta_lambda;
  bool optimize_eta = false;
  std::optional<double> catoni_lambda;
  std::vector<double> catoni_grid;
  double second_moment = 1.0;
  bool second_moment_plugin = false;
  bool fixed_prior_std = false;
};

struct LipschitzFlags {
  std::string dataset;
  ModelFlags model;
  double delta = 0.025;
  std::uint64_t seed = 0;
  LipFlags lip;
  std::string candidates;
};

struct StudentFlags {
  std::optional<double> p;
  std::optional<double> alpha_stable;
  std::size_t d = 1;
  double sigma = 1.0;
  double mu_dist = 0.0;
  std::size_t m = 1;
  double delta = 0.05;
  double lip = 0.0;
  double risk = 0.0;
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
};

struct ReproduceFlags {
  std::string row;
  std::string reference;
  std::uint64_t seed = 0;
  std::optional<std::size_t> iterations;
  LipFlags lip;
};

std::string default_data_dir() {
  if (const char* env = std::getenv("DATA_DIR"); env != nullptr && *env != '\0') return env;
  return FGPAC_DEFAULT_DATA_DIR;
}

fs::path require_data_dir(const std::string& dir) {
  if (dir.empty() || !fs::is_directory(dir)) {
    throw UsageError("data directory '" + dir +
                     "' does not exist; pass --data-dir or set DATA_DIR");
  }
  return dir;
}

TrainTestSplit load_or_usage(const std::string& name, const std::string& dir, std::uint64_t seed) {
  const fs::path root = require_data_dir(dir);
  try {
    dataset_spec(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(e.what()) + "; pass a known --dataset");
  }
  try {
    return load_benchmark(name, root, seed);
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("not found") != std::string::npos) {
      throw UsageError(std::string(e.what()) + "; check --data-dir or DATA_DIR (see tools/fetch_datasets.py)");
    }
    throw;
  }
}

ModelKind parse_model(const std::string& s) {
  if (s == "linear") return ModelKind::Linear;
  if (s == "mlp") return ModelKind::Mlp;
  throw UsageError("--model must be linear or mlp, got '" + s + "'");
}

BoundFamily parse_bound(const std::string& s) {
  try {
    return parse_family(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--bound: ") + e.what());
  }
}

PosteriorKind parse_posterior(const std::string& s) {
  try {
    return parse_posterior_kind(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--posterior: ") + e.what());
  }
}

SurrogateConfig surrogate_config(const LipFlags& f) {
  SurrogateConfig sc;
  sc.restarts = f.restarts;
  sc.iterations = f.iterations;
  sc.batch_size = f.batch;
  sc.checkpoint_every = f.checkpoint_every;
  return sc;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const json& config) {
  const std::string s = config.dump();
  return hex64(fnv1a64({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
}

void emit(const std::string& out, const json& j) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
  }
}

json lip_flags_json(const LipFlags& f) {
  return {{"restarts", f.restarts}, {"iterations", f.iterations}, {"batch", f.batch},
          {"checkpoint_every", f.checkpoint_every}};
}

void add_lip_flags(CLI::App* cmd, LipFlags& f) {
  cmd->add_option("--lip-restarts", f.restarts, "Ascent restarts for the Lipschitz surrogate")->capture_default_str();
  cmd->add_option("--lip-iterations", f.iterations, "Ascent iterations per restart")->capture_default_str();
  cmd->add_option("--lip-batch", f.batch, "Ascent batch size")->capture_default_str();
  cmd->add_option("--lip-checkpoint-every", f.checkpoint_every, "Full-sample scoring cadence")->capture_default_str();
}

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--model", f.model, "linear or mlp")->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "Hidden width N (mlp)")->capture_default_str();
  cmd->add_option("--depth", f.depth, "Hidden layers K (mlp)")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "Margin scale (default 25 linear, 250 mlp)");
}

// ---------------------------------------------------------------------------
// train

json train_config_json(const TrainFlags& f) {
  return {{"command", "train"},
          {"dataset", f.dataset},
          {"model", f.model.model},
          {"hidden", f.model.hidden},
          {"depth", f.model.depth},
          {"alpha", f.model.alpha},
          {"posterior", f.posterior},
          {"bound", f.bound},
          {"delta", f.delta},
          {"seed", f.seed},
          {"prior_fraction", f.prior_fraction},
          {"iterations", f.iterations},
          {"batch", f.batch},
          {"cocob", f.cocob},
          {"lambda_init", f.lambda_init},
          {"sigma_init", f.sigma_init},
          {"prior_std", f.prior_std},
          {"learn_prior_std", !f.fixed_prior_std},
          {"frobenius", f.frobenius},
          {"mc_samples", f.mc_samples},
          {"strict_hoeffding", f.strict_hoeffding},
          {"erm_epochs", f.erm_epochs},
          {"lipschitz", lip_flags_json(f.lip)}};
}

ExperimentConfig experiment_config(const TrainFlags& f) {
  ExperimentConfig c;
  c.model = parse_model(f.model.model);
  c.hidden_width = f.model.hidden;
  c.depth = f.model.depth;
  c.alpha = f.model.alpha;
  c.posterior = parse_posterior(f.posterior);
  c.family = parse_bound(f.bound);
  c.delta = f.delta;
  c.seed = f.seed;
  c.prior_fraction = f.prior_fraction;
  c.batch_size = f.batch;
  c.min_iterations = f.iterations;
  c.cocob_alpha = f.cocob;
  c.lambda_init = f.lambda_init;
  c.sigma_init = f.sigma_init;
  c.prior_std = f.prior_std;
  c.learn_prior_std = !f.fixed_prior_std;
  c.frobenius_projection = f.frobenius;
  c.mc_samples = f.mc_samples;
  c.strict_hoeffding = f.strict_hoeffding;
  c.erm_epochs = f.erm_epochs;
  c.surrogate = surrogate_config(f.lip);
  c.log_path = f.log;
  c.checkpoint_path = f.checkpoint;
  c.checkpoint_every = f.checkpoint_every;
  if (!is_trainable(c.family, c.posterior)) {
    throw UsageError("--bound " + f.bound + " is not a training objective for a " + f.posterior +
                     " posterior (use kl-wass, reverse-kl, hellinger, tv, or mcallester with gaussian)");
  }
  if (!(c.prior_fraction >= 0.0 && c.prior_fraction < 1.0)) throw UsageError("--prior-fraction must lie in [0, 1)");
  return c;
}

json experiment_report(const ExperimentResult& r, const json& config, const std::string& dataset,
                       std::size_t test_size) {
  BoundReport rep = r.trained.report;
  rep.provenance["config_hash"] = config_hash(config);
  rep.provenance["dataset"] = dataset;
  rep.provenance["kernels"] = std::string(kernels::isa_name(kernels::active_isa()));
  json j = to_json(rep);
  j["evaluation"] = {{"test_risk", r.test_risk},
                     {"test_size", test_size},
                     {"cert_size", r.cert_size},
                     {"prior_size", r.prior_size}};
  j["config"] = config;
  return j;
}

void print_summary(const ExperimentResult& r) {
  const auto& t = r.trained.report.terms;
  auto term = [&](const char* k) { return t.count(k) ? t.at(k) : 0.0; };
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << "test " << r.test_risk << "  bound " << r.trained.report.value << "  risk "
    << term("risk") << "  wass " << term("wass_term") << "  kl/2m " << term("kl_term")
    << "  lambda " << term("eta_lambda");
  std::cerr << s.str() << '\n';
}

int cmd_train(const Common& common, const TrainFlags& f) {
  const json config = train_config_json(f);
  const ExperimentConfig cfg = experiment_config(f);
  if (common.dry_run) {
    std::cout << config.dump(2) << '\n';
    return 0;
  }
  const TrainTestSplit data = load_or_usage(f.dataset, common.data_dir, f.seed);
  const ExperimentResult r = run_experiment(data.train, data.test, cfg);
  emit(common.out, experiment_report(r, config, f.dataset, data.test.size()));
  print_summary(r);
  return 0;
}

// ---------------------------------------------------------------------------
// certify

int cmd_certify(const Common& common, const CertifyFlags& f) {
  const BoundFamily family = parse_bound(f.bound);
  json config = {{"command", "certify"},   {"checkpoint", f.checkpoint},
                 {"dataset", f.dataset},   {"bound", f.bound},
                 {"delta", f.delta},       {"seed", f.seed},
                 {"prior_fraction", f.prior_fraction},
                 {"lipschitz_file", f.lipschitz_file},
                 {"lipschitz", lip_flags_json(f.lip)},
                 {"mc_samples", f.mc_samples},
                 {"strict_hoeffding", f.strict_hoeffding},
                 {"optimize_eta", f.optimize_eta},
                 {"second_moment", f.second_moment},
                 {"second_moment_plugin", f.second_moment_plugin},
                 {"catoni_grid", f.catoni_grid},
                 {"learn_prior_std", !f.fixed_prior_std}};
  config["eta_lambda"] = f.eta_lambda ? json(*f.eta_lambda) : json(nullptr);
  config["catoni_lambda"] = f.catoni_lambda ? json(*f.catoni_lambda) : json(nullptr);
  if (family == BoundFamily::Student) throw UsageError("the student bound is computed by the 'student' command");
  if (common.dry_run) {
    std::cout << config.dump(2) << '\n';
    return 0;
  }
  if (!fs::exists(f.checkpoint)) throw UsageError("--checkpoint " + f.checkpoint + " not found");
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const ModelShape& shape = ckpt.params.shape;
  const TrainTestSplit data = load_or_usage(f.dataset, common.data_dir, f.seed);
  if (data.train.cols() != shape.input_dim) throw UsageError("checkpoint input width does not match --dataset");

  Dataset cert = data.train;
  if (ckpt.prior_epochs > 0) {
    if (!(f.prior_fraction > 0.0)) {
      throw UsageError("checkpoint has a data-dependent prior; pass the --prior-fraction it was trained with");
    }
    cert = split_prior(data.train, f.prior_fraction, f.seed).second;
  }

  const PosteriorMeasure posterior = ckpt.posterior();
  std::vector<DeltaShare> ledger;
  try {
    ledger = compose_delta_budget(f.delta, family, ckpt.posterior_kind, family_uses_wasserstein(family),
                                  ckpt.posterior_kind == PosteriorKind::Gaussian);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("cannot certify: ") + e.what());
  }
  LipschitzEstimate lip;
  if (!f.lipschitz_file.empty()) {
    lip = lipschitz_from_json(read_json(f.lipschitz_file));
  } else if (family_uses_wasserstein(family)) {
    SurrogateConfig sc = surrogate_config(f.lip);
    sc.seed = f.seed ^ 0x9e3779b97f4a7c15ULL;
    const auto sr = maximize_surrogate(data.train, sample_rademacher(data.train.size(), sc.seed), shape, sc);
    lip = lipschitz_constant(sr.value, loss_lipschitz_const(shape), data.train.size(),
                             ledger_share(ledger, "lipschitz"));
  } else {
    lip = lipschitz_constant(0.0, loss_lipschitz_const(shape), data.train.size(), f.delta);
  }

  CertifyOptions opt;
  opt.family = family;
  opt.delta = f.delta;
  opt.snap_prior_variance = !f.fixed_prior_std;
  opt.prior_epochs = ckpt.prior_epochs;
  opt.mc_samples = f.mc_samples;
  opt.mc_seed = f.seed ^ 0x5bd1e995ULL;
  opt.strict_hoeffding = f.strict_hoeffding;
  opt.catoni.lambda = f.catoni_lambda;
  opt.catoni.lambda_grid = f.catoni_grid;
  opt.catoni.second_moment = f.second_moment;
  opt.catoni.second_moment_plugin = f.second_moment_plugin;

  std::optional<GaussianMeasure> eta;
  if (family_uses_wasserstein(family)) {
    const double eta_std = ckpt.posterior_kind == PosteriorKind::Dirac ? ckpt.eta_std : ckpt.posterior_std;
    auto at = [&](double lambda) { return interpolate_eta(posterior, ckpt.prior, lambda, eta_std); };
    eta = at(f.eta_lambda.value_or(ckpt.eta_lambda));
    if (f.optimize_eta) {
      // The certificate holds for every eta; keep the best of a fine grid.
      BoundReport best = certify(shape, posterior, ckpt.prior, eta, cert, lip, opt);
      for (int k = 0; k <= 100; ++k) {
        const auto cand = at(k / 100.0);
        BoundReport r = certify(shape, posterior, ckpt.prior, cand, cert, lip, opt);
        if (r.value < best.value) {
          best = std::move(r);
          eta = cand;
        }
      }
    }
  }

  BoundReport rep;
  try {
    rep = certify(shape, posterior, ckpt.prior, eta, cert, lip, opt);
  } catch (const std::logic_error& e) {
    throw UsageError(std::string("cannot certify: ") + e.what());
  }
  rep.provenance["config_hash"] = config_hash(config);
  rep.provenance["checkpoint"] = f.checkpoint;
  rep.provenance["dataset"] = f.dataset;
  json j = to_json(rep);
  j["config"] = config;
  emit(common.out, j);
  std::cerr << "bound " << rep.value << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// lipschitz

int cmd_lipschitz(const Common& common, const LipschitzFlags& f) {
  const json config = {{"command", "lipschitz"}, {"dataset", f.dataset},
                       {"model", f.model.model}, {"hidden", f.model.hidden},
                       {"depth", f.model.depth}, {"alpha", f.model.alpha},
                       {"delta", f.delta},       {"seed", f.seed},
                       {"candidates", f.candidates}, {"lipschitz", lip_flags_json(f.lip)}};
  if (!(f.delta > 0.0 && f.delta < 1.0)) throw UsageError("--delta must lie in (0, 1)");
  const ModelKind kind = parse_model(f.model.model);
  if (common.dry_run) {
    std::cout << config.dump(2) << '\n';
    return 0;
  }
  const TrainTestSplit data = load_or_usage(f.dataset, common.data_dir, f.seed);
  ExperimentConfig ec;
  ec.model = kind;
  ec.hidden_width = f.model.hidden;
  ec.depth = f.model.depth;
  ec.alpha = f.model.alpha;
  const ModelShape shape = experiment_shape(ec, data.train.cols(), data.train.class_count());

  SurrogateConfig sc = surrogate_config(f.lip);
  sc.seed = f.seed;
  const RademacherSigns eps = sample_rademacher(data.train.size(), sc.seed);
  std::vector<std::vector<double>> candidates;
  if (!f.candidates.empty()) {
    if (!fs::exists(f.candidates)) throw UsageError("--candidates " + f.candidates + " not found");
    candidates = read_json(f.candidates).get<std::vector<std::vector<double>>>();
    for (const auto& c : candidates) {
      if (c.size() != shape.param_count()) throw UsageError("candidate has the wrong dimension");
    }
    sc.restrict_to_seeds = true;
  }
  const SurrogateResult sr = maximize_surrogate(data.train, eps, shape, sc, candidates);
  LipschitzEstimate est = lipschitz_constant(sr.value, loss_lipschitz_const(shape), data.train.size(), f.delta);
  est.trace = sr.trace;

  json j = to_json(est);
  j["provenance"] = {{"config_hash", config_hash(config)},
                     {"dataset", f.dataset},
                     {"train_fingerprint", std::to_string(data.train.fingerprint())},
                     {"seed", std::to_string(f.seed)},
                     {"parameter_count", std::to_string(shape.param_count())}};
  j["estimate_kind"] = candidates.empty() ? "ascent lower estimate of the supremum"
                                          : "exact maximum over the candidate set";
  if (!candidates.empty()) j["brute_force"] = brute_force_surrogate(candidates, shape, data.train, eps);
  j["config"] = config;
  j["created_at"] = utc_timestamp();
  emit(common.out, j);
  std::cerr << "surrogate " << est.surrogate << "  L(m, delta) " << est.value << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// student

int cmd_student(const Common& common, const StudentFlags& f) {
  if (f.p.has_value() == f.alpha_stable.has_value()) throw UsageError("pass exactly one of --p and --alpha-stable");
  double p = 0.0;
  if (f.alpha_stable) {
    if (!(*f.alpha_stable > 1.0 && *f.alpha_stable < 2.0)) throw UsageError("--alpha-stable must lie in (1, 2)");
    p = student_dof_from_alpha(*f.alpha_stable);
  } else {
    p = *f.p;
  }
  if (!(p > 1.0)) throw UsageError("the degrees of freedom p must exceed 1");
  if (f.samples < 1000) throw UsageError("--samples must be at least 1000");
  json config = {{"command", "student"}, {"p", p},         {"d", f.d},
                 {"sigma", f.sigma},     {"mu_dist", f.mu_dist}, {"m", f.m},
                 {"delta", f.delta},     {"lip", f.lip},   {"risk", f.risk},
                 {"samples", f.samples}, {"seed", f.seed}};
  config["alpha_stable"] = f.alpha_stable ? json(*f.alpha_stable) : json(nullptr);
  if (common.dry_run) {
    std::cout << config.dump(2) << '\n';
    return 0;
  }
  const MonteCarloFactor fac = mc_f_factor(p, f.d, f.samples, f.seed);
  const double dist_sq = f.mu_dist * f.mu_dist;

  BoundReport rep;
  rep.family = BoundFamily::Student;
  rep.posterior = PosteriorKind::Gaussian;
  rep.m = f.m;
  rep.delta = f.delta;
  // The supplied constant is L(m, delta/2); the formula's ln(4 sqrt(m)/delta) covers the other half.
  rep.delta_ledger = {{"bound", f.delta / 2.0}, {"lipschitz", f.delta - f.delta / 2.0}};
  rep.terms = {{"risk", f.risk},     {"m", static_cast<double>(f.m)},
               {"delta_formula", f.delta}, {"lipschitz", f.lip},
               {"sigma", f.sigma},   {"f_pd", fac.value},
               {"f_pd_std_error", fac.std_error}, {"mean_dist_sq", dist_sq},
               {"dof", p},           {"mc_samples", static_cast<double>(f.samples)}};
  rep.value = recompute_value(rep);
  rep.terms["gap"] = rep.value - f.risk;
  rep.notes.push_back("the divergence term is ||mu - mu0||^2 / (2 sigma m) with sigma, not sigma^2");
  rep.provenance = {{"config_hash", config_hash(config)}, {"seed", std::to_string(f.seed)}};
  json j = to_json(rep);
  j["config"] = config;
  emit(common.out, j);
  std::cerr << "f(p, d) " << fac.value << " +- " << fac.std_error << "  bound " << rep.value << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce

int cmd_reproduce(const Common& common, const ReproduceFlags& f) {
  if (!fs::exists(f.reference)) throw UsageError("--reference " + f.reference + " not found");
  const json ref = read_json(f.reference);
  const json* row = nullptr;
  std::string supported;
  for (const auto& r : ref.at("rows")) {
    supported += "\n  " + r.at("id").get<std::string>();
    if (r.at("id") == f.row) row = &r;
  }
  if (row == nullptr) throw UsageError("unknown row '" + f.row + "'; supported rows:" + supported);

  TrainFlags t;
  t.dataset = row->at("dataset").get<std::string>();
  t.model.model = row->at("model").get<std::string>();
  t.posterior = row->at("posterior").get<std::string>();
  t.bound = "kl-wass";
  t.seed = f.seed;
  if (f.iterations) t.iterations = *f.iterations;
  t.lip = f.lip;
  json config = train_config_json(t);
  config["command"] = "reproduce";
  config["row"] = f.row;
  if (common.dry_run) {
    std::cout << config.dump(2) << '\n';
    return 0;
  }
  const ExperimentConfig cfg = experiment_config(t);
  const TrainTestSplit data = load_or_usage(t.dataset, common.data_dir, t.seed);
  const ExperimentResult r = run_experiment(data.train, data.test, cfg);
  json j = experiment_report(r, config, t.dataset, data.test.size());

  const auto& terms = r.trained.report.terms;
  const json& published = row->at("values");
  const std::map<std::string, double> ours = {{"test", r.test_risk},
                                              {"bound", r.trained.report.value},
                                              {"wass", terms.at("wass_term")},
                                              {"kl", terms.at("kl_term")}};
  json cmp = json::object();
  for (const auto& [k, v] : ours) {
    const double pv = published.at(k).get<double>();
    cmp[k] = {{"ours", v}, {"published", pv}, {"abs_diff", std::abs(v - pv)}};
  }
  j["comparison"] = {{"row", f.row}, {"source", row->at("source")}, {"columns", cmp}};
  emit(common.out, j);
  print_summary(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayes bound minimisation and certificates interpolating KL and Wasserstein"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  common.data_dir = default_data_dir();
  app.add_option("--data-dir", common.data_dir, "Dataset directory (env DATA_DIR)")->capture_default_str();
  app.add_option("-o,--out", common.out, "Output JSON path (stdout when empty)");
  app.add_flag("--dry-run", common.dry_run, "Print the resolved configuration and exit");
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel set: auto, scalar or avx2")->capture_default_str();

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Estimate the Lipschitz constant, train and certify");
  train->add_option("--dataset", tf.dataset, "Benchmark name")->required();
  add_model_flags(train, tf.model);
  train->add_option("--posterior", tf.posterior, "dirac or gaussian")->capture_default_str();
  train->add_option("--bound", tf.bound, "Objective family")->capture_default_str();
  train->add_option("--delta", tf.delta, "Global confidence")->capture_default_str();
  train->add_option("--seed", tf.seed, "Seed for splits, init and sampling")->capture_default_str();
  train->add_option("--prior-fraction", tf.prior_fraction, "Train the prior mean on this fraction (0: zero prior)")->capture_default_str();
  train->add_option("--iterations", tf.iterations, "Minimum iterations (the epoch is finished)")->capture_default_str();
  train->add_option("--batch-size", tf.batch, "Batch size")->capture_default_str();
  train->add_option("--cocob", tf.cocob, "COCOB-Backprop alpha")->capture_default_str();
  train->add_option("--lambda-init", tf.lambda_init, "Initial interpolation weight")->capture_default_str();
  train->add_option("--sigma-init", tf.sigma_init, "Initial posterior (or eta) std")->capture_default_str();
  train->add_option("--prior-std", tf.prior_std, "Initial prior std")->capture_default_str();
  train->add_flag("--fixed-prior-std", tf.fixed_prior_std, "Do not learn the prior std (no grid union bound)");
  train->add_flag("--frobenius", tf.frobenius, "Project weight matrices into the unit Frobenius ball");
  train->add_option("--mc-samples", tf.mc_samples, "Posterior draws for the risk estimate")->capture_default_str();
  train->add_flag("--strict-hoeffding", tf.strict_hoeffding, "Use sqrt(ln(1/delta)/(2T)) for the sampling term");
  train->add_option("--erm-epochs", tf.erm_epochs, "Epochs for the data-dependent prior")->capture_default_str();
  add_lip_flags(train, tf.lip);
  train->add_option("--log", tf.log, "JSON-lines training log");
  train->add_option("--checkpoint", tf.checkpoint, "Checkpoint file");
  train->add_option("--checkpoint-every", tf.checkpoint_every, "Checkpoint cadence in iterations (0: final only)");

  CertifyFlags cf;
  auto* cert = app.add_subcommand("certify", "Certify a saved posterior under any bound family");
  cert->add_option("--checkpoint", cf.checkpoint, "Checkpoint file")->required();
  cert->add_option("--dataset", cf.dataset, "Benchmark name")->required();
  cert->add_option("--bound", cf.bound, "Bound family")->capture_default_str();
  cert->add_option("--delta", cf.delta, "Global confidence")->capture_default_str();
  cert->add_option("--seed", cf.seed, "Split seed used for training")->capture_default_str();
  cert->add_option("--prior-fraction", cf.prior_fraction, "Prior split used for training")->capture_default_str();
  cert->add_option("--lipschitz", cf.lipschitz_file, "Lipschitz estimate JSON (estimated when absent)");
  add_lip_flags(cert, cf.lip);
  cert->add_option("--mc-samples", cf.mc_samples, "Posterior draws for the risk estimate")->capture_default_str();
  cert->add_flag("--strict-hoeffding", cf.strict_hoeffding, "Tighter sampling term");
  cert->add_option("--eta-lambda", cf.eta_lambda, "Interpolation weight of eta (default: checkpoint)");
  cert->add_flag("--optimize-eta", cf.optimize_eta, "Pick eta on a lambda grid");
  cert->add_option("--catoni-lambda", cf.catoni_lambda, "Fixed lambda for the Catoni families");
  cert->add_option("--catoni-grid", cf.catoni_grid, "Lambda grid (union bound)");
  cert->add_option("--second-moment", cf.second_moment, "Upper bound on E l^2 (supermartingale)")->capture_default_str();
  cert->add_flag("--second-moment-plugin", cf.second_moment_plugin, "Empirical plug-in for E l^2 (not rigorous)");
  cert->add_flag("--fixed-prior-std", cf.fixed_prior_std, "Prior std was fixed before training");

  LipschitzFlags lf;
  auto* lipc = app.add_subcommand("lipschitz", "Estimate the Rademacher surrogate and L(m, delta)");
  lipc->add_option("--dataset", lf.dataset, "Benchmark name")->required();
  add_model_flags(lipc, lf.model);
  lipc->add_option("--delta", lf.delta, "Confidence of the Lipschitz event")->capture_default_str();
  lipc->add_option("--seed", lf.seed, "Seed for the split, signs and ascent")->capture_default_str();
  lipc->add_option("--candidates", lf.candidates, "JSON array of parameter vectors: exact max over this set");
  add_lip_flags(lipc, lf.lip);

  StudentFlags sf;
  auto* stu = app.add_subcommand("student", "Student posterior bound and the factor f(p, d)");
  stu->add_option("--p", sf.p, "Degrees of freedom");
  stu->add_option("--alpha-stable", sf.alpha_stable, "Tail index alpha, mapped to p = alpha / (2 - alpha)");
  stu->add_option("--d", sf.d, "Dimension")->capture_default_str();
  stu->add_option("--sigma", sf.sigma, "Scale")->capture_default_str();
  stu->add_option("--mu-dist", sf.mu_dist, "||mu - mu0||")->capture_default_str();
  stu->add_option("--m", sf.m, "Sample size")->capture_default_str();
  stu->add_option("--delta", sf.delta, "Global confidence")->capture_default_str();
  stu->add_option("--lip", sf.lip, "Lipschitz constant L(m, delta/2)")->capture_default_str();
  stu->add_option("--risk", sf.risk, "Empirical risk term")->capture_default_str();
  stu->add_option("--samples", sf.samples, "Monte-Carlo samples")->capture_default_str();
  stu->add_option("--seed", sf.seed, "Monte-Carlo seed")->capture_default_str();

  ReproduceFlags rf;
  rf.reference = FGPAC_DEFAULT_REFERENCE;
  auto* rep = app.add_subcommand("reproduce", "Run a published configuration and compare");
  rep->add_option("row", rf.row, "Row id, e.g. table1a-mushrooms")->required();
  rep->add_option("--reference", rf.reference, "Published values file")->capture_default_str();
  rep->add_option("--seed", rf.seed, "Seed")->capture_default_str();
  rep->add_option("--iterations", rf.iterations, "Override the minimum iteration count");
  add_lip_flags(rep, rf.lip);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (isa == "scalar") {
      kernels::set_isa(kernels::Isa::Scalar);
    } else if (isa == "avx2") {
      if (!kernels::avx2_available()) throw UsageError("--isa avx2 requested but AVX2 is unavailable");
      kernels::set_isa(kernels::Isa::Avx2);
    } else if (isa != "auto") {
      throw UsageError("--isa must be auto, scalar or avx2");
    }
    if (*train) return cmd_train(common, tf);
    if (*cert) return cmd_certify(common, cf);
    if (*lipc) return cmd_lipschitz(common, lf);
    if (*stu) return cmd_student(common, sf);
    if (*rep) return cmd_reproduce(common, rf);
  } catch (const UsageError& e) {
    std::cerr << "fgpac: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fgpac: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

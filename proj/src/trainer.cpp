#include "fgpac/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fgpac/checkpoint.hpp"
#include "fgpac/cocob.hpp"
#include "fgpac/dual.hpp"
#include "fgpac/kernels.hpp"
#include "json.hpp"

namespace fgpac {
namespace {

using D4 = Dual<4>;

std::vector<double> prior_mean_of(const TrainConfig& cfg) {
  const std::size_t d = cfg.shape.param_count();
  if (cfg.prior_mean.empty()) return std::vector<double>(d, 0.0);
  if (cfg.prior_mean.size() != d) throw std::invalid_argument("prior mean has the wrong dimension");
  return cfg.prior_mean;
}

std::vector<double> initial_theta(const ModelShape& shape, std::uint64_t seed) {
  if (shape.kind == ModelKind::Linear) return init_linear(shape).theta;
  return init_mlp(shape, seed).theta;
}

std::vector<DeltaShare> ledger_for(const TrainConfig& cfg) {
  return compose_delta_budget(cfg.delta, cfg.objective, cfg.posterior_kind,
                              family_uses_wasserstein(cfg.objective),
                              cfg.posterior_kind == PosteriorKind::Gaussian);
}

PosteriorMeasure posterior_of(const TrainableState& s, PosteriorKind kind) {
  if (kind == PosteriorKind::Dirac) return DiracMeasure(s.theta);
  return GaussianMeasure(s.theta, s.sigma());
}

void write_log(std::ofstream& log, const TrajectoryPoint& p) {
  nlohmann::json j;
  j["iteration"] = p.iteration;
  j["objective"] = p.objective;
  j["risk_term"] = p.risk;
  j["gap_term"] = p.gap;
  log << j.dump() << '\n';
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logit needs p in (0, 1)");
  return std::log(p / (1.0 - p));
}

double TrainableState::sigma() const { return std::exp(log_sigma); }
double TrainableState::lambda() const { return sigmoid(lambda_logit); }
double TrainableState::prior_sigma() const { return std::exp(log_prior_sigma); }

std::vector<double> TrainableState::flatten() const {
  std::vector<double> z(theta);
  z.push_back(log_sigma);
  z.push_back(lambda_logit);
  z.push_back(log_prior_sigma);
  return z;
}

TrainableState TrainableState::unflatten(std::span<const double> z) {
  if (z.size() < 3) throw std::invalid_argument("state vector too short");
  TrainableState s;
  const std::size_t d = z.size() - 3;
  s.theta.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(d));
  s.log_sigma = z[d];
  s.lambda_logit = z[d + 1];
  s.log_prior_sigma = z[d + 2];
  return s;
}

bool is_trainable(BoundFamily family, PosteriorKind kind) {
  switch (family) {
    case BoundFamily::KlWasserstein:
    case BoundFamily::ReverseKl:
    case BoundFamily::Hellinger:
    case BoundFamily::Tv:
      return true;
    case BoundFamily::McAllester:
      return kind == PosteriorKind::Gaussian;
    default:
      return false;
  }
}

GaussianMeasure eta_from_state(const TrainableState& state, const GaussianMeasure& prior,
                               PosteriorKind kind) {
  return interpolate_eta(posterior_of(state, kind), prior, state.lambda(), state.sigma());
}

ObjectiveResult objective_and_grad(const TrainableState& state, const Dataset& data,
                                   std::span<const std::size_t> batch, const TrainConfig& cfg,
                                   std::size_t m, std::span<const double> noise) {
  const ModelShape& shape = cfg.shape;
  const std::size_t d = shape.param_count();
  if (state.theta.size() != d) throw std::invalid_argument("state dimension does not match the model");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (!is_trainable(cfg.objective, cfg.posterior_kind)) {
    throw std::invalid_argument("family " + std::string(to_string(cfg.objective)) +
                                " is not a training objective for this posterior");
  }
  const bool gaussian = cfg.posterior_kind == PosteriorKind::Gaussian;
  if (gaussian && noise.size() != d) throw std::invalid_argument("Gaussian objective needs d noise values");

  ObjectiveResult res;
  res.grad.assign(d + 3, 0.0);
  std::span<double> g_theta(res.grad.data(), d);

  // Risk term (one reparametrised draw for a Gaussian posterior).
  const double sigma = state.sigma();
  std::vector<double> theta_eval(state.theta);
  if (gaussian) {
    for (std::size_t i = 0; i < d; ++i) theta_eval[i] += sigma * noise[i];
  }
  ModelEvaluator ev(shape);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double risk = 0.0;
  double kink = std::numeric_limits<double>::infinity();
  for (const std::size_t i : batch) {
    risk += ev.loss_and_grad(theta_eval, data.row(i), data.label(i), inv_b, g_theta) * inv_b;
    kink = std::min(kink, ev.kink_margin());
  }
  if (gaussian) res.grad[d] += sigma * kernels::dot(g_theta, noise);

  // Gap term over the scalar ingredients (dist, log_sigma, lambda_logit, log_prior_sigma).
  const std::vector<double> w_p = prior_mean_of(cfg);
  std::vector<double> diff(state.theta);
  kernels::axpy(-1.0, w_p, diff);
  const double dist = std::sqrt(kernels::squared_norm(diff));

  const D4 dist_v = D4::variable(dist, 0);
  const D4 sig = exp(D4::variable(state.log_sigma, 1));
  const D4 lam = 1.0 / (1.0 + exp(-D4::variable(state.lambda_logit, 2)));
  const D4 sig_p = exp(D4::variable(state.log_prior_sigma, 3));
  const D4 var_p = sig_p * sig_p;
  const double dd = static_cast<double>(d);
  const D4 dist_sq = dist_v * dist_v;

  D4 var_eta;
  D4 transport;
  if (gaussian) {
    var_eta = lam * sig * sig + (1.0 - lam) * var_p;
    const D4 sig_eta = sqrt(var_eta);
    const D4 ds = sig - sig_eta;
    transport = sqrt((1.0 - lam) * (1.0 - lam) * dist_sq + dd * ds * ds);
  } else {
    var_eta = sig * sig;
    transport = (1.0 - lam) * dist_v + sig * chi_mean(d);
  }
  const D4 eta_prior_sq = lam * lam * dist_sq;

  const auto ledger = ledger_for(cfg);
  const double bound_share = ledger_share(ledger, "bound");
  D4 surcharge(cfg.prior_epochs > 1 ? std::log(static_cast<double>(cfg.prior_epochs)) : 0.0);
  if (cfg.learn_prior_std) {
    D4 j = cfg.prior_grid.b * (std::log(cfg.prior_grid.c) - 2.0 * D4::variable(state.log_prior_sigma, 3));
    if (j < 1.0) j = D4(1.0);
    surcharge = surcharge + 2.0 * log(j) + std::log(std::numbers::pi * std::numbers::pi / 6.0);
  }
  const D4 delta_eff = bound_share * exp(-surcharge);
  const double md = static_cast<double>(m);

  double lip_raw = 0.0;
  if (family_uses_wasserstein(cfg.objective)) {
    lip_raw = lipschitz_constant(cfg.lipschitz.surrogate, cfg.lipschitz.loss_lip, cfg.lipschitz.m,
                                 ledger_share(ledger, "lipschitz"))
                  .value;
  }

  D4 gap;
  switch (cfg.objective) {
    case BoundFamily::KlWasserstein: {
      const double lip = 2.0 * lip_raw;
      const D4 kl = iso::kl(dd, eta_prior_sq, var_eta, var_p);
      gap = expr::kl_wass(lip * transport, kl, md, 2.0 * delta_eff);
      break;
    }
    case BoundFamily::McAllester: {
      const D4 kl = iso::kl(dd, dist_sq, sig * sig, var_p);
      gap = expr::mcallester(kl, md, delta_eff);
      break;
    }
    case BoundFamily::ReverseKl:
      gap = expr::reverse_kl(lip_raw * transport, iso::kl(dd, eta_prior_sq, var_p, var_eta), md,
                             delta_eff);
      break;
    case BoundFamily::Hellinger:
      gap = expr::hellinger(lip_raw * transport,
                            iso::squared_hellinger(dd, eta_prior_sq, var_eta, var_p), md, delta_eff);
      break;
    case BoundFamily::Tv:
      gap = expr::tv(lip_raw * transport, iso::tv_upper(dd, eta_prior_sq, var_eta, var_p), md,
                     delta_eff);
      break;
    default:
      throw std::logic_error("untrainable family");
  }

  if (dist > 0.0) kernels::axpy(gap.d[0] / dist, diff, g_theta);
  res.grad[d] += gap.d[1];
  res.grad[d + 1] += gap.d[2];
  res.grad[d + 2] += cfg.learn_prior_std ? gap.d[3] : 0.0;

  res.risk = risk;
  res.gap = gap.v;
  res.value = risk + gap.v;
  res.kink_margin = kink;
  return res;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  cfg.shape.validate();
  if (data.size() == 0) throw std::invalid_argument("training set is empty");
  if (data.cols() != cfg.shape.input_dim) throw std::invalid_argument("dataset width does not match the model");
  if (data.class_count() > cfg.shape.class_count) throw std::invalid_argument("dataset has more classes than the model");
  if (cfg.batch_size < 1 || cfg.min_iterations < 1) throw std::invalid_argument("batch size and iterations must be >= 1");
  if (!is_trainable(cfg.objective, cfg.posterior_kind)) {
    throw std::invalid_argument("family " + std::string(to_string(cfg.objective)) +
                                " cannot be trained with a " +
                                std::string(to_string(cfg.posterior_kind)) + " posterior");
  }
  if (!(cfg.lambda_init > 0.0 && cfg.lambda_init < 1.0)) throw std::invalid_argument("lambda_init must lie in (0, 1)");
  if (!(cfg.sigma_init > 0.0 && cfg.prior_std > 0.0)) throw std::invalid_argument("stds must be positive");

  const std::size_t d = cfg.shape.param_count();
  const std::size_t m = data.size();
  const bool gaussian = cfg.posterior_kind == PosteriorKind::Gaussian;
  const std::vector<double> w_p = prior_mean_of(cfg);

  TrainableState init;
  init.theta = initial_theta(cfg.shape, cfg.seed);
  init.log_sigma = std::log(cfg.sigma_init);
  init.lambda_logit = logit(cfg.lambda_init);
  init.log_prior_sigma = std::log(cfg.prior_std);
  std::vector<double> z = init.flatten();
  CocobOptimizer opt(z, cfg.cocob_alpha);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> noise(gaussian ? d : 0);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    if (cfg.log_path.has_parent_path()) std::filesystem::create_directories(cfg.log_path.parent_path());
    log.open(cfg.log_path);
    if (!log) throw std::runtime_error("cannot write training log " + cfg.log_path.string());
  }

  TrainResult out{init, DiracMeasure(init.theta), GaussianMeasure(w_p, cfg.prior_std),
                  GaussianMeasure(w_p, cfg.prior_std), 1.0, {}, {}, 0, 0};

  auto snapshot = [&](const TrainableState& s, double eta_lambda) {
    Checkpoint c{ModelParams(cfg.shape, s.theta), cfg.posterior_kind, gaussian ? s.sigma() : 0.0,
                 eta_lambda, s.sigma(), GaussianMeasure(w_p, s.prior_sigma()), cfg.prior_epochs};
    save_checkpoint(cfg.checkpoint_path, c);
  };

  std::size_t iteration = 0;
  while (true) {
    std::shuffle(order.begin(), order.end(), rng);
    ++out.epochs;
    for (std::size_t start = 0; start < m; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, m - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      for (double& v : noise) v = normal(rng);
      const TrainableState s = TrainableState::unflatten(z);
      const ObjectiveResult r = objective_and_grad(s, data, batch, cfg, m, noise);
      if (!std::isfinite(r.value)) {
        std::ostringstream msg;
        msg << "objective became non-finite at iteration " << iteration << " (risk " << r.risk
            << ", gap " << r.gap << ", sigma " << s.sigma() << ", lambda " << s.lambda()
            << ", prior sigma " << s.prior_sigma() << ")";
        throw std::runtime_error(msg.str());
      }
      opt.step(z, r.grad);
      if (cfg.frobenius_projection) project_weights_frobenius(cfg.shape, std::span<double>(z.data(), d));
      ++iteration;
      if (cfg.log_every > 0 && iteration % cfg.log_every == 0) {
        const TrajectoryPoint p{iteration, r.value, r.risk, r.gap};
        out.trajectory.push_back(p);
        if (log) write_log(log, p);
      }
      if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
          iteration % cfg.checkpoint_every == 0) {
        const TrainableState s = TrainableState::unflatten(z);
        snapshot(s, s.lambda());
      }
    }
    if (iteration >= cfg.min_iterations) break;
  }
  out.iterations = iteration;
  out.state = TrainableState::unflatten(z);

  // Certificate on the training set with the same ledger as the objective.
  out.posterior = posterior_of(out.state, cfg.posterior_kind);
  out.prior = GaussianMeasure(w_p, out.state.prior_sigma());
  const auto ledger = ledger_for(cfg);
  CertifyOptions copt;
  copt.family = cfg.objective;
  copt.delta = cfg.delta;
  copt.prior_grid = cfg.prior_grid;
  copt.snap_prior_variance = cfg.learn_prior_std;
  copt.prior_epochs = cfg.prior_epochs;
  copt.mc_samples = cfg.mc_samples;
  copt.mc_seed = cfg.seed ^ 0x5bd1e995ULL;
  copt.strict_hoeffding = cfg.strict_hoeffding;
  copt.frobenius_enforced = cfg.frobenius_projection;
  copt.precomputed_risk =
      gaussian ? mc_expected_risk(out.posterior, cfg.shape, data, cfg.mc_samples,
                                  ledger_share(ledger, "hoeffding"), copt.mc_seed,
                                  cfg.strict_hoeffding)
               : mc_expected_risk(out.posterior, cfg.shape, data, 0, cfg.delta, copt.mc_seed);

  const bool transport = family_uses_wasserstein(cfg.objective);
  auto certify_at = [&](double lambda) {
    std::optional<GaussianMeasure> eta;
    if (transport) eta = interpolate_eta(out.posterior, out.prior, lambda, out.state.sigma());
    return certify(cfg.shape, out.posterior, out.prior, eta, data, cfg.lipschitz, copt);
  };

  double best_lambda = out.state.lambda();
  BoundReport best = certify_at(best_lambda);
  if (transport && cfg.refine_lambda) {
    // eta may be chosen after training; the certificate holds for every eta.
    auto consider = [&](double lambda) {
      BoundReport r = certify_at(lambda);
      const double v = r.value;
      if (v < best.value) {
        best = std::move(r);
        best_lambda = lambda;
      }
      return v;
    };
    consider(0.0);
    consider(1.0);
    double lo = 0.0, hi = 1.0;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = consider(x1), f2 = consider(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 <= f2) {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = consider(x1);
      } else {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = consider(x2);
      }
    }
  }
  out.eta_lambda = best_lambda;
  if (!cfg.checkpoint_path.empty()) snapshot(out.state, best_lambda);
  out.eta = transport ? interpolate_eta(out.posterior, out.prior, best_lambda, out.state.sigma())
                      : eta_from_state(out.state, out.prior, cfg.posterior_kind);
  best.terms["eta_lambda"] = best_lambda;
  best.terms["train_iterations"] = static_cast<double>(out.iterations);
  best.terms["train_epochs"] = static_cast<double>(out.epochs);
  best.provenance["train_seed"] = std::to_string(cfg.seed);
  out.report = std::move(best);
  return out;
}

ErmPrior train_erm_prior(const Dataset& full_train, double fraction, const TrainConfig& cfg) {
  cfg.shape.validate();
  if (cfg.erm_epochs < 1) throw std::invalid_argument("ERM needs at least one epoch");
  SplitPair split = split_prior(full_train, fraction, cfg.seed);
  if (split.first.size() == 0 || split.second.size() == 0) throw std::invalid_argument("empty prior split");
  const Dataset& prior_set = split.first;
  const Dataset& cert_set = split.second;

  const std::size_t d = cfg.shape.param_count();
  std::vector<double> theta = initial_theta(cfg.shape, cfg.seed);
  CocobOptimizer opt(theta, cfg.cocob_alpha);
  ModelEvaluator ev(cfg.shape);
  std::vector<double> grad(d);
  std::mt19937_64 rng(cfg.seed ^ 0x27d4eb2fULL);
  std::vector<std::size_t> order(prior_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ErmPrior out{theta, cfg.erm_epochs, 0, prior_set, cert_set};
  double best_risk = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.erm_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(len);
      for (std::size_t k = start; k < start + len; ++k) {
        ev.loss_and_grad(theta, prior_set.row(order[k]), prior_set.label(order[k]), scale, grad);
      }
      opt.step(theta, grad);
      if (cfg.frobenius_projection) project_weights_frobenius(cfg.shape, theta);
    }
    const double risk = empirical_risk(theta, cfg.shape, cert_set);
    if (risk < best_risk) {
      best_risk = risk;
      out.mean = theta;
      out.best_epoch = epoch;
    }
  }
  return out;
}

}  // namespace fgpac

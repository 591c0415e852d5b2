#include "fgpac/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "fgpac/kernels.hpp"

namespace fgpac {
namespace {

void require_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1), got " + std::to_string(delta));
  }
}

void require_m(std::size_t m) {
  if (m < 1) throw std::invalid_argument("sample size must be >= 1");
}

void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite and nonnegative");
  }
}

struct FamilyName {
  BoundFamily family;
  std::string_view name;
};

constexpr std::array<FamilyName, 9> kFamilyNames{{
    {BoundFamily::McAllester, "mcallester"},
    {BoundFamily::KlWasserstein, "kl-wass"},
    {BoundFamily::ReverseKl, "reverse-kl"},
    {BoundFamily::Hellinger, "hellinger"},
    {BoundFamily::Tv, "tv"},
    {BoundFamily::Catoni, "catoni"},
    {BoundFamily::SupermartingaleUB, "supermartingale"},
    {BoundFamily::CatoniFastRate, "catoni-fast-rate"},
    {BoundFamily::Student, "student"},
}};

double term(const BoundReport& r, const std::string& key) {
  const auto it = r.terms.find(key);
  if (it == r.terms.end()) {
    throw std::invalid_argument("report is missing term '" + key + "'");
  }
  return it->second;
}

const std::vector<double>& location(const PosteriorMeasure& p) {
  if (const auto* g = std::get_if<GaussianMeasure>(&p)) return g->mean();
  return std::get<DiracMeasure>(p).point();
}

// Transport distance from the posterior to eta: exact chi-mean bound for a
// point mass, W2 (which dominates W1) between Gaussians.
double transport(const PosteriorMeasure& rho, const GaussianMeasure& eta) {
  if (const auto* g = std::get_if<GaussianMeasure>(&rho)) return w2_gaussian(*g, eta);
  return w1_dirac_to_gaussian(std::get<DiracMeasure>(rho), eta);
}

std::vector<std::size_t> grid_candidates(double sigma_sq, const PriorGrid& grid) {
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("prior variance must be positive");
  const double j_real = grid.b * std::log(grid.c / sigma_sq);
  if (j_real <= 1.0) return {1};
  const double lo = std::floor(j_real);
  const double hi = std::ceil(j_real);
  if (hi - j_real < 1e-9 * j_real || lo == hi) return {static_cast<std::size_t>(std::llround(j_real))};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

std::string_view to_string(BoundFamily family) {
  for (const auto& f : kFamilyNames) {
    if (f.family == family) return f.name;
  }
  return "unknown";
}

std::string_view to_string(PosteriorKind kind) {
  return kind == PosteriorKind::Dirac ? "dirac" : "gaussian";
}

BoundFamily parse_family(std::string_view name) {
  for (const auto& f : kFamilyNames) {
    if (f.name == name) return f.family;
  }
  std::string known;
  for (const auto& f : kFamilyNames) known += (known.empty() ? "" : ", ") + std::string(f.name);
  throw std::invalid_argument("unknown bound family '" + std::string(name) + "' (known: " + known + ")");
}

PosteriorKind parse_posterior_kind(std::string_view name) {
  if (name == "dirac") return PosteriorKind::Dirac;
  if (name == "gaussian") return PosteriorKind::Gaussian;
  throw std::invalid_argument("unknown posterior kind '" + std::string(name) +
                              "' (known: dirac, gaussian)");
}

const std::vector<BoundFamily>& all_families() {
  static const std::vector<BoundFamily> families = [] {
    std::vector<BoundFamily> out;
    for (const auto& f : kFamilyNames) out.push_back(f.family);
    return out;
  }();
  return families;
}

bool family_uses_wasserstein(BoundFamily family) { return family != BoundFamily::McAllester; }

double mcallester_gap(double kl, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  require_nonneg(kl, "KL");
  return expr::mcallester(kl, static_cast<double>(m), delta);
}

double kl_wass_gap(double lip, double w1, double kl, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  require_nonneg(lip, "Lipschitz constant");
  require_nonneg(w1, "W1");
  require_nonneg(kl, "KL");
  return expr::kl_wass(lip * w1, kl, static_cast<double>(m), delta);
}

double reverse_kl_gap(double w_gamma, double rkl, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  require_nonneg(w_gamma, "IPM term");
  require_nonneg(rkl, "reverse KL");
  return expr::reverse_kl(w_gamma, rkl, static_cast<double>(m), delta);
}

double hellinger_gap(double w_gamma, double h2, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  require_nonneg(w_gamma, "IPM term");
  require_nonneg(h2, "squared Hellinger");
  return expr::hellinger(w_gamma, h2, static_cast<double>(m), delta);
}

double tv_gap(double w_gamma, double tv, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  require_nonneg(w_gamma, "IPM term");
  require_nonneg(tv, "TV");
  if (tv > 1.0) throw std::invalid_argument("TV must be <= 1");
  return expr::tv(w_gamma, tv, static_cast<double>(m), delta);
}

double catoni_gap(double lip, double w1, double kl, double lambda, std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  require_nonneg(lip, "Lipschitz constant");
  require_nonneg(w1, "W1");
  require_nonneg(kl, "KL");
  return 2.0 * lip * w1 + (kl + std::log(2.0 / delta)) / lambda +
         lambda / (2.0 * static_cast<double>(m));
}

double supermartingale_gap(double lip, double w1, double kl, double lambda, std::size_t m,
                           double delta, double second_moment) {
  require_delta(delta);
  require_m(m);
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(second_moment >= 0.0 && second_moment <= 1.0)) {
    throw std::invalid_argument("second moment must lie in [0, 1]");
  }
  require_nonneg(lip, "Lipschitz constant");
  require_nonneg(w1, "W1");
  require_nonneg(kl, "KL");
  return (2.0 + lambda) * lip * w1 + (kl + std::log(2.0 / delta)) / lambda +
         0.5 * lambda * second_moment;
}

double catoni_fast_rate(double emp_risk, double lip, double w1, double kl, double lambda,
                        std::size_t m, double delta) {
  require_delta(delta);
  require_m(m);
  if (!(lambda > 0.0 && lambda < 2.0)) throw std::invalid_argument("lambda must lie in (0, 2)");
  require_nonneg(emp_risk, "empirical risk");
  require_nonneg(lip, "Lipschitz constant");
  require_nonneg(w1, "W1");
  require_nonneg(kl, "KL");
  const double inner = emp_risk + (2.0 + lambda) * lip * w1 +
                       (kl + std::log(2.0 / delta)) / (lambda * static_cast<double>(m));
  return inner / (1.0 - 0.5 * lambda);
}

double student_bound(double lip, double sigma, double f_pd, double mean_dist_sq, std::size_t m,
                     double delta) {
  require_delta(delta);
  require_m(m);
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  require_nonneg(lip, "Lipschitz constant");
  require_nonneg(f_pd, "f(p, d)");
  require_nonneg(mean_dist_sq, "squared mean distance");
  const double md = static_cast<double>(m);
  return std::sqrt(lip * sigma * f_pd + mean_dist_sq / (2.0 * sigma * md) +
                   std::log(4.0 * std::sqrt(md) / delta) / (2.0 * md));
}

MonteCarloFactor mc_f_factor(double p, std::size_t d, std::size_t n_samples, std::uint64_t seed) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be a finite value > 1");
  if (n_samples < 1000) throw std::invalid_argument("mc_f_factor needs at least 1000 samples");
  // E sqrt(p/u) = sqrt(p) Gamma((p-1)/2) / (sqrt(2) Gamma(p/2)).
  const double log_mean = 0.5 * std::log(p) + std::lgamma(0.5 * (p - 1.0)) -
                          0.5 * std::numbers::ln2 - std::lgamma(0.5 * p);
  const double mean_minus_one = std::expm1(log_mean);

  // |x - 1| = (x - 1) + 2 (1 - x)_+, the second part lies in [0, 1].
  std::mt19937_64 rng(seed);
  std::chi_squared_distribution<double> chi2(p);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x = std::sqrt(p / chi2(rng));
    const double y = std::max(0.0, 1.0 - x);
    sum += y;
    sum_sq += y * y;
  }
  const double n = static_cast<double>(n_samples);
  const double mean_y = sum / n;
  const double var_y = std::max(0.0, (sum_sq - n * mean_y * mean_y) / (n - 1.0));
  const double root_d = std::sqrt(static_cast<double>(d));
  MonteCarloFactor out;
  out.value = root_d * std::max(0.0, mean_minus_one + 2.0 * mean_y);
  out.std_error = root_d * 2.0 * std::sqrt(var_y / n);
  return out;
}

double heavy_tail_factor(double alpha, std::size_t d) {
  if (!(alpha > 1.0 && alpha <= 2.0)) throw std::invalid_argument("alpha must lie in (1, 2]");
  if (d < 2) throw std::invalid_argument("heavy-tail factor needs d >= 2");
  if (alpha == 2.0) return 0.0;
  const double dd = static_cast<double>(d);
  const double gap = 2.0 - alpha;
  return dd * std::log(dd) * gap * std::log(1.0 / gap);
}

double student_dof_from_alpha(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (1, 2)");
  return alpha / (2.0 - alpha);
}

MonteCarloRisk mc_expected_risk(const PosteriorMeasure& posterior, const ModelShape& shape,
                                const Dataset& data, std::size_t samples, double delta,
                                std::uint64_t seed, bool strict) {
  if (data.size() == 0) throw std::invalid_argument("expected risk of an empty dataset");
  MonteCarloRisk out;
  if (const auto* dirac = std::get_if<DiracMeasure>(&posterior)) {
    out.mean = empirical_risk(dirac->point(), shape, data);
    out.value = out.mean;
    return out;
  }
  require_delta(delta);
  if (samples < 1) throw std::invalid_argument("need at least one posterior sample");
  const auto& g = std::get<GaussianMeasure>(posterior);
  if (g.dim() != shape.param_count()) throw std::invalid_argument("posterior dimension mismatch");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> theta(g.dim());
  double sum = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = g.mean()[i] + g.std() * normal(rng);
    sum += empirical_risk(theta, shape, data);
  }
  const double t_d = static_cast<double>(samples);
  out.samples = samples;
  out.mean = sum / t_d;
  out.correction = strict ? std::sqrt(std::log(1.0 / delta) / (2.0 * t_d))
                          : std::sqrt(2.0 * std::log(1.0 / delta) / t_d);
  out.value = out.mean + out.correction;
  return out;
}

PriorGridPoint prior_grid_point(std::size_t j, const PriorGrid& grid, double delta) {
  require_delta(delta);
  if (j < 1) throw std::invalid_argument("grid index must be >= 1");
  if (!(grid.c > 0.0 && grid.b > 0.0)) throw std::invalid_argument("grid constants must be positive");
  const double jd = static_cast<double>(j);
  PriorGridPoint pt;
  pt.j = j;
  pt.sigma_sq = grid.c * std::exp(-jd / grid.b);
  pt.surcharge = 2.0 * std::log(jd) + std::log(std::numbers::pi * std::numbers::pi / 6.0);
  pt.penalty = 2.0 * std::log(grid.b * std::log(grid.c / pt.sigma_sq)) +
               std::log(std::numbers::pi * std::numbers::pi / (6.0 * delta));
  return pt;
}

PriorGridPoint prior_variance_penalty(double sigma_p_sq, const PriorGrid& grid, double delta,
                                      const std::function<double(const PriorGridPoint&)>& score) {
  if (!(sigma_p_sq > 0.0 && sigma_p_sq < grid.c)) {
    throw std::invalid_argument("prior variance must lie in (0, c)");
  }
  PriorGridPoint best;
  double best_score = std::numeric_limits<double>::infinity();
  bool first = true;
  for (const std::size_t j : grid_candidates(sigma_p_sq, grid)) {
    const PriorGridPoint pt = prior_grid_point(j, grid, delta);
    const double s = score ? score(pt) : pt.penalty;
    if (first || s < best_score) {
      best = pt;
      best_score = s;
      first = false;
    }
  }
  return best;
}

double data_dependent_prior_penalty(std::size_t epochs, double delta) {
  require_delta(delta);
  if (epochs < 1) throw std::invalid_argument("epoch count must be >= 1");
  return std::log(static_cast<double>(epochs));
}

std::vector<DeltaShare> compose_delta_budget(double delta, BoundFamily family,
                                             PosteriorKind kind, bool uses_wasserstein,
                                             bool uses_mc) {
  require_delta(delta);
  if (uses_wasserstein != family_uses_wasserstein(family)) {
    throw std::invalid_argument("family " + std::string(to_string(family)) +
                                (uses_wasserstein ? " has no" : " needs a") + " Wasserstein term");
  }
  std::vector<std::string> purposes;
  if (kind == PosteriorKind::Dirac) {
    if (uses_mc) throw std::invalid_argument("a Dirac posterior needs no Monte-Carlo risk estimate");
    if (!uses_wasserstein) {
      throw std::invalid_argument("KL between a Dirac posterior and a Gaussian prior is infinite");
    }
    purposes = {"bound", "lipschitz"};
  } else {
    if (!uses_mc) throw std::invalid_argument("a Gaussian posterior needs a Monte-Carlo risk estimate");
    purposes = uses_wasserstein ? std::vector<std::string>{"bound", "lipschitz", "hoeffding"}
                                : std::vector<std::string>{"bound", "hoeffding"};
  }
  std::vector<DeltaShare> ledger;
  const double share = delta / static_cast<double>(purposes.size());
  double used = 0.0;
  for (std::size_t i = 0; i < purposes.size(); ++i) {
    const double s = i + 1 == purposes.size() ? delta - used : share;
    ledger.push_back({purposes[i], s});
    used += s;
  }
  return ledger;
}

double ledger_share(const std::vector<DeltaShare>& ledger, std::string_view purpose) {
  for (const auto& e : ledger) {
    if (e.purpose == purpose) return e.share;
  }
  throw std::invalid_argument("ledger has no '" + std::string(purpose) + "' entry");
}

double recompute_value(const BoundReport& r) {
  const double risk = term(r, "risk");
  const auto m = static_cast<std::size_t>(term(r, "m"));
  const double delta = term(r, "delta_formula");
  switch (r.family) {
    case BoundFamily::McAllester:
      return risk + mcallester_gap(term(r, "kl"), m, delta);
    case BoundFamily::KlWasserstein:
      return risk + kl_wass_gap(term(r, "lipschitz"), term(r, "w1"), term(r, "kl"), m, delta);
    case BoundFamily::ReverseKl:
      return risk + reverse_kl_gap(term(r, "lipschitz") * term(r, "w1"), term(r, "reverse_kl"), m,
                                   delta);
    case BoundFamily::Hellinger:
      return risk + hellinger_gap(term(r, "lipschitz") * term(r, "w1"),
                                  term(r, "hellinger_sq"), m, delta);
    case BoundFamily::Tv:
      return risk + tv_gap(term(r, "lipschitz") * term(r, "w1"), term(r, "tv"), m, delta);
    case BoundFamily::Catoni:
      return risk + catoni_gap(term(r, "lipschitz"), term(r, "w1"), term(r, "kl"),
                               term(r, "lambda"), m, delta);
    case BoundFamily::SupermartingaleUB:
      return risk + supermartingale_gap(term(r, "lipschitz"), term(r, "w1"), term(r, "kl"),
                                        term(r, "lambda"), m, delta, term(r, "second_moment"));
    case BoundFamily::CatoniFastRate:
      return catoni_fast_rate(risk, term(r, "lipschitz"), term(r, "w1"), term(r, "kl"),
                              term(r, "lambda"), m, delta);
    case BoundFamily::Student:
      return risk + student_bound(term(r, "lipschitz"), term(r, "sigma"), term(r, "f_pd"),
                                  term(r, "mean_dist_sq"), m, delta);
  }
  throw std::logic_error("unhandled bound family");
}

GaussianMeasure interpolate_eta(const PosteriorMeasure& posterior, const GaussianMeasure& prior,
                                double lambda, std::optional<double> dirac_eta_std) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  const auto& w = location(posterior);
  if (w.size() != prior.dim()) throw std::invalid_argument("posterior and prior dimensions differ");
  std::vector<double> mean(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    mean[i] = lambda * w[i] + (1.0 - lambda) * prior.mean()[i];
  }
  double std_eta;
  if (const auto* g = std::get_if<GaussianMeasure>(&posterior)) {
    std_eta = std::sqrt(lambda * g->variance() + (1.0 - lambda) * prior.variance());
  } else {
    std_eta = dirac_eta_std.value_or(prior.std());
  }
  return GaussianMeasure(std::move(mean), std_eta);
}

EtaChoice best_interpolating_eta(const PosteriorMeasure& posterior, const GaussianMeasure& prior,
                                 double lip, std::size_t m, double delta,
                                 std::optional<double> dirac_eta_std) {
  auto gap_at = [&](double lambda) {
    const GaussianMeasure eta = interpolate_eta(posterior, prior, lambda, dirac_eta_std);
    return kl_wass_gap(lip, transport(posterior, eta), kl_gaussian(eta, prior), m, delta);
  };

  double best_lambda = 0.0;
  double best_gap = gap_at(0.0);
  auto consider = [&](double lambda) {
    const double g = gap_at(lambda);
    if (g < best_gap) {
      best_gap = g;
      best_lambda = lambda;
    }
    return g;
  };
  consider(1.0);

  // Coarse scan, then golden-section refinement inside the best bracket.
  constexpr int kGrid = 32;
  int best_cell = 0;
  double best_cell_gap = std::numeric_limits<double>::infinity();
  for (int k = 1; k < kGrid; ++k) {
    const double g = consider(static_cast<double>(k) / kGrid);
    if (g < best_cell_gap) {
      best_cell_gap = g;
      best_cell = k;
    }
  }
  double lo = static_cast<double>(std::max(best_cell - 1, 0)) / kGrid;
  double hi = static_cast<double>(std::min(best_cell + 1, kGrid)) / kGrid;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = consider(x1);
  double f2 = consider(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = consider(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = consider(x2);
    }
  }
  return {best_lambda, interpolate_eta(posterior, prior, best_lambda, dirac_eta_std), best_gap};
}

BoundReport certify(const ModelShape& shape, const PosteriorMeasure& posterior,
                    const GaussianMeasure& prior, const std::optional<GaussianMeasure>& eta_in,
                    const Dataset& cert_data, const LipschitzEstimate& lipschitz,
                    const CertifyOptions& opt) {
  const BoundFamily family = opt.family;
  const PosteriorKind kind = is_dirac(posterior) ? PosteriorKind::Dirac : PosteriorKind::Gaussian;
  if (family == BoundFamily::Student) {
    throw std::invalid_argument("the Student bound is certified from its scalar ingredients");
  }
  if (family == BoundFamily::McAllester && kind == PosteriorKind::Dirac) {
    throw std::invalid_argument(
        "McAllester needs KL(rho || P), which is infinite for a Dirac posterior and a Gaussian "
        "prior; pick a transport family such as kl-wass");
  }
  if (dimension(posterior) != shape.param_count() || prior.dim() != shape.param_count()) {
    throw std::invalid_argument("posterior/prior dimension does not match the model");
  }
  if (cert_data.size() == 0) throw std::invalid_argument("empty certification set");

  const bool uses_w = family_uses_wasserstein(family);
  const bool uses_mc = kind == PosteriorKind::Gaussian;
  std::optional<GaussianMeasure> eta = eta_in;
  if (uses_w && !eta) {
    if (kind == PosteriorKind::Dirac) {
      throw std::invalid_argument("a transport family with a Dirac posterior needs an explicit eta");
    }
    eta = std::get<GaussianMeasure>(posterior);
  }
  if (eta && eta->dim() != shape.param_count()) throw std::invalid_argument("eta dimension mismatch");

  BoundReport base;
  base.family = family;
  base.posterior = kind;
  base.m = cert_data.size();
  base.delta = opt.delta;
  base.delta_ledger = compose_delta_budget(opt.delta, family, kind, uses_w, uses_mc);
  const double bound_share = ledger_share(base.delta_ledger, "bound");

  const MonteCarloRisk risk =
      opt.precomputed_risk ? *opt.precomputed_risk
      : uses_mc ? mc_expected_risk(posterior, shape, cert_data, opt.mc_samples,
                                 ledger_share(base.delta_ledger, "hoeffding"), opt.mc_seed,
                                 opt.strict_hoeffding)
              : mc_expected_risk(posterior, shape, cert_data, 0, opt.delta, opt.mc_seed);
  base.terms["risk"] = risk.value;
  base.terms["m"] = static_cast<double>(base.m);
  if (uses_mc) {
    base.terms["mc_risk_mean"] = risk.mean;
    base.terms["hoeffding"] = risk.correction;
    base.terms["mc_samples"] = static_cast<double>(risk.samples);
  }

  double lip_raw = 0.0;
  if (uses_w) {
    const LipschitzEstimate est =
        lipschitz_constant(lipschitz.surrogate, lipschitz.loss_lip, lipschitz.m,
                           ledger_share(base.delta_ledger, "lipschitz"));
    lip_raw = est.value;
    base.terms["surrogate"] = est.surrogate;
    base.terms["loss_lipschitz"] = est.loss_lip;
    base.terms["lipschitz_m"] = static_cast<double>(est.m);
    base.terms["lipschitz_raw"] = est.value;
    base.notes.push_back("lipschitz surrogate is the best value found by stochastic ascent, an "
                         "empirical estimate rather than a certified supremum");
  }
  if (shape.kind == ModelKind::Mlp) {
    base.notes.push_back(opt.frobenius_enforced
                             ? "weight matrices were kept inside the unit Frobenius ball"
                             : "weight matrices were not constrained to the unit Frobenius ball; "
                               "the loss Lipschitz constant assumes they are");
  }
  base.provenance["dataset_fingerprint"] = std::to_string(cert_data.fingerprint());
  base.provenance["mc_seed"] = std::to_string(opt.mc_seed);
  base.provenance["posterior"] = std::string(to_string(kind));

  double data_surcharge = 0.0;
  if (opt.prior_epochs > 1) {
    data_surcharge = data_dependent_prior_penalty(opt.prior_epochs, opt.delta);
  }
  const double m_d = static_cast<double>(base.m);

  // Catoni-family lambdas, fixed before looking at the data.
  std::vector<double> lambdas;
  double lambda_surcharge = 0.0;
  if (family == BoundFamily::Catoni || family == BoundFamily::SupermartingaleUB ||
      family == BoundFamily::CatoniFastRate) {
    if (!opt.catoni.lambda_grid.empty()) {
      lambdas = opt.catoni.lambda_grid;
      lambda_surcharge = std::log(static_cast<double>(lambdas.size()));
    } else if (opt.catoni.lambda) {
      lambdas = {*opt.catoni.lambda};
    } else if (family == BoundFamily::Catoni) {
      lambdas = {std::sqrt(2.0 * m_d * std::log(2.0 / bound_share))};
    } else if (family == BoundFamily::SupermartingaleUB) {
      lambdas = {std::sqrt(2.0 * std::log(2.0 / bound_share))};
    } else {
      lambdas = {1.0};
    }
  }

  double second_moment = opt.catoni.second_moment;
  if (family == BoundFamily::SupermartingaleUB && opt.catoni.second_moment_plugin) {
    ModelEvaluator ev(shape);
    const auto& w = location(posterior);
    double s = 0.0;
    for (std::size_t i = 0; i < cert_data.size(); ++i) {
      const double l = ev.loss(w, cert_data.row(i), cert_data.label(i));
      s += l * l;
    }
    second_moment = s / m_d;
    base.notes.push_back("second moment is an empirical plug-in; the certificate is not rigorous");
  }
  if (family == BoundFamily::SupermartingaleUB) {
    base.notes.push_back("lambda is the rescaled parameter (m times the per-sample lambda); the "
                         "divergence term is divided by it once");
  }

  auto evaluate = [&](const GaussianMeasure& p, double grid_surcharge) {
    BoundReport r = base;
    const double surcharge = grid_surcharge + data_surcharge;
    const double delta_eff = bound_share * std::exp(-surcharge);
    r.terms["prior_std"] = p.std();
    r.terms["confidence_surcharge"] = surcharge;
    double w1 = 0.0;
    if (eta) {
      w1 = transport(posterior, *eta);
      r.terms["eta_std"] = eta->std();
    }
    switch (family) {
      case BoundFamily::McAllester: {
        const double kl = kl_gaussian(std::get<GaussianMeasure>(posterior), p);
        r.terms["kl"] = kl;
        r.terms["kl_term"] = kl / (2.0 * m_d);
        r.terms["delta_formula"] = delta_eff;
        break;
      }
      case BoundFamily::KlWasserstein: {
        const double lip = lipschitz_for_squared_gap(
            lipschitz_constant(lipschitz.surrogate, lipschitz.loss_lip, lipschitz.m,
                               ledger_share(base.delta_ledger, "lipschitz")),
            opt.gap_bound);
        const double kl = kl_gaussian(*eta, p);
        r.terms["lipschitz"] = lip;
        r.terms["w1"] = w1;
        r.terms["kl"] = kl;
        r.terms["wass_term"] = lip * w1;
        r.terms["kl_term"] = kl / (2.0 * m_d);
        // The formula already splits its delta between the bound and the Lipschitz event.
        r.terms["delta_formula"] = 2.0 * delta_eff;
        break;
      }
      case BoundFamily::ReverseKl:
      case BoundFamily::Hellinger:
      case BoundFamily::Tv: {
        r.terms["lipschitz"] = lip_raw;
        r.terms["w1"] = w1;
        r.terms["wass_term"] = lip_raw * w1;
        if (family == BoundFamily::ReverseKl) r.terms["reverse_kl"] = reverse_kl(*eta, p);
        if (family == BoundFamily::Hellinger) r.terms["hellinger_sq"] = squared_hellinger(*eta, p);
        if (family == BoundFamily::Tv) r.terms["tv"] = tv_upper(*eta, p);
        r.terms["delta_formula"] = delta_eff;
        break;
      }
      case BoundFamily::Catoni:
      case BoundFamily::SupermartingaleUB:
      case BoundFamily::CatoniFastRate: {
        const double kl = kl_gaussian(*eta, p);
        const double d_formula = delta_eff * std::exp(-lambda_surcharge);
        r.terms["lipschitz"] = lip_raw;
        r.terms["w1"] = w1;
        r.terms["kl"] = kl;
        r.terms["wass_term"] = lip_raw * w1;
        r.terms["delta_formula"] = d_formula;
        r.terms["lambda_grid_surcharge"] = lambda_surcharge;
        if (family == BoundFamily::SupermartingaleUB) r.terms["second_moment"] = second_moment;
        double best_value = std::numeric_limits<double>::infinity();
        double best_lambda = lambdas.front();
        for (const double lambda : lambdas) {
          r.terms["lambda"] = lambda;
          const double v = recompute_value(r);
          if (v < best_value) {
            best_value = v;
            best_lambda = lambda;
          }
        }
        r.terms["lambda"] = best_lambda;
        break;
      }
      case BoundFamily::Student:
        break;
    }
    r.value = recompute_value(r);
    r.terms["gap"] = r.value - risk.value;
    return r;
  };

  if (!opt.snap_prior_variance) {
    BoundReport r = evaluate(prior, 0.0);
    r.provenance["prior_variance"] = "fixed before training";
    return r;
  }
  BoundReport best;
  bool have = false;
  for (const std::size_t j : grid_candidates(prior.variance(), opt.prior_grid)) {
    const PriorGridPoint pt = prior_grid_point(j, opt.prior_grid, bound_share);
    BoundReport r = evaluate(GaussianMeasure(prior.mean(), std::sqrt(pt.sigma_sq)), pt.surcharge);
    r.terms["prior_grid_j"] = static_cast<double>(j);
    if (!have || r.value < best.value) {
      best = std::move(r);
      have = true;
    }
  }
  best.provenance["prior_variance"] = "snapped to the grid c exp(-j/b), c=" +
                                      std::to_string(opt.prior_grid.c) +
                                      ", b=" + std::to_string(opt.prior_grid.b);
  return best;
}

}  // namespace fgpac

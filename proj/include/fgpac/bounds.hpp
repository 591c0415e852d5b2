#pragma once

// Generalisation-gap evaluators for every certificate family, confidence
// budgeting (delta splits, union-bound surcharges), Monte-Carlo corrections,
// and the assembly of a full certificate into a BoundReport.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fgpac/data.hpp"
#include "fgpac/lipschitz.hpp"
#include "fgpac/measures.hpp"
#include "fgpac/models.hpp"

namespace fgpac {

enum class BoundFamily {
  McAllester,
  KlWasserstein,
  ReverseKl,
  Hellinger,
  Tv,
  Catoni,
  SupermartingaleUB,
  CatoniFastRate,
  Student,
};

enum class PosteriorKind { Dirac, Gaussian };

std::string_view to_string(BoundFamily family);
std::string_view to_string(PosteriorKind kind);
/// Accepts the names printed by to_string; throws std::invalid_argument otherwise.
BoundFamily parse_family(std::string_view name);
PosteriorKind parse_posterior_kind(std::string_view name);
const std::vector<BoundFamily>& all_families();

/// True for families whose certificate contains a Wasserstein (IPM) term.
bool family_uses_wasserstein(BoundFamily family);

// Scalar gap formulas. Generic in T so the trainer can differentiate the same
// expressions the certificate evaluates; the double overloads below validate.
namespace expr {

// `D` is the confidence type: double for certificates, a dual number when the
// trainer differentiates through a confidence surcharge.
template <class T, class D>
T mcallester(const T& kl, double m, const D& delta) {
  using std::log;
  using std::sqrt;
  return sqrt((kl + log(2.0 * std::sqrt(m) / delta)) / (2.0 * m));
}

template <class T, class D>
T kl_wass(const T& lip_w1, const T& kl, double m, const D& delta) {
  using std::log;
  using std::sqrt;
  return sqrt(lip_w1 + (kl + log(4.0 * std::sqrt(m) / delta)) / (2.0 * m));
}

template <class T, class D>
T reverse_kl(const T& w_gamma, const T& rkl, double m, const D& delta) {
  using std::log;
  using std::sqrt;
  return 2.0 * w_gamma + 2.0 * rkl + std::sqrt(1.0 / m) +
         std::log1p(1.0 / m) * sqrt(2.0 * m * log(1.0 / delta));
}

template <class T, class D>
T hellinger(const T& w_gamma, const T& h2, double m, const D& delta) {
  using std::log;
  using std::sqrt;
  return 2.0 * w_gamma + 2.0 * h2 + std::sqrt(1.0 / m) +
         (2.0 / (m + 1.0)) * sqrt(2.0 * m * log(1.0 / delta));
}

template <class T, class D>
T tv(const T& w_gamma, const T& tv_value, double m, const D& delta) {
  using std::log;
  using std::sqrt;
  return w_gamma + tv_value + std::sqrt(1.0 / (4.0 * m)) + sqrt(log(1.0 / delta) / (2.0 * m));
}

}  // namespace expr

double mcallester_gap(double kl, std::size_t m, double delta);
double kl_wass_gap(double lip, double w1, double kl, std::size_t m, double delta);
double reverse_kl_gap(double w_gamma, double rkl, std::size_t m, double delta);
double hellinger_gap(double w_gamma, double h2, std::size_t m, double delta);
double tv_gap(double w_gamma, double tv, std::size_t m, double delta);
double catoni_gap(double lip, double w1, double kl, double lambda, std::size_t m, double delta);
/// (2 + lambda) lip w1 + (kl + ln(2/delta)) / lambda + (lambda / 2) second_moment.
/// `lambda` is the already-rescaled parameter (m times the per-sample one).
double supermartingale_gap(double lip, double w1, double kl, double lambda, std::size_t m,
                           double delta, double second_moment = 1.0);
/// Direct bound on the population risk, not on the gap.
double catoni_fast_rate(double emp_risk, double lip, double w1, double kl, double lambda,
                        std::size_t m, double delta);
/// sqrt(lip sigma f_pd + ||mu - mu0||^2 / (2 sigma m) + ln(4 sqrt(m) / delta) / (2m)).
double student_bound(double lip, double sigma, double f_pd, double mean_dist_sq, std::size_t m,
                     double delta);

struct MonteCarloFactor {
  double value = 0.0;
  double std_error = 0.0;
};

/// sqrt(d) E|sqrt(p/u) - 1|, u ~ chi^2_p. The unbounded part E sqrt(p/u) is
/// exact; only the bounded part E[(1 - sqrt(p/u))_+] is sampled.
MonteCarloFactor mc_f_factor(double p, std::size_t d, std::size_t n_samples, std::uint64_t seed);

/// d ln(d) (2 - alpha) ln(1 / (2 - alpha)); 0 at alpha = 2.
double heavy_tail_factor(double alpha, std::size_t d);

/// p = alpha / (2 - alpha).
double student_dof_from_alpha(double alpha);

struct MonteCarloRisk {
  double mean = 0.0;
  double correction = 0.0;
  double value = 0.0;
  std::size_t samples = 0;
};

/// Empirical risk of a Dirac posterior (no correction), or the average over T
/// posterior draws plus sqrt(2 ln(1/delta) / T) (sqrt(ln(1/delta) / (2T)) when strict).
MonteCarloRisk mc_expected_risk(const PosteriorMeasure& posterior, const ModelShape& shape,
                                const Dataset& data, std::size_t samples, double delta,
                                std::uint64_t seed, bool strict = false);

struct PriorGridPoint {
  std::size_t j = 1;
  double sigma_sq = 0.0;
  /// 2 ln(j) + ln(pi^2 / 6): the amount ln(1/delta) grows by.
  double surcharge = 0.0;
  /// 2 ln(b ln(c / sigma_sq)) + ln(pi^2 / (6 delta)).
  double penalty = 0.0;
};

struct PriorGrid {
  double c = 1.1;
  double b = 100.0;
};

PriorGridPoint prior_grid_point(std::size_t j, const PriorGrid& grid, double delta);

/// Snaps sigma_p_sq onto sigma_j^2 = c exp(-j / b) (j >= 1). Among the two
/// adjacent grid points the one with the smaller `score` wins; without a score
/// the smaller penalty wins.
PriorGridPoint prior_variance_penalty(
    double sigma_p_sq, const PriorGrid& grid, double delta,
    const std::function<double(const PriorGridPoint&)>& score = {});

/// ln(T_epochs): the surcharge on ln(1/delta) for a prior picked among T checkpoints.
double data_dependent_prior_penalty(std::size_t epochs, double delta);

struct DeltaShare {
  std::string purpose;
  double share = 0.0;
};

/// bound/lipschitz at delta/2 (Dirac), bound/hoeffding at delta/2 (Gaussian
/// without transport term), bound/lipschitz/hoeffding at delta/3 otherwise.
std::vector<DeltaShare> compose_delta_budget(double delta, BoundFamily family,
                                             PosteriorKind kind, bool uses_wasserstein,
                                             bool uses_mc);
double ledger_share(const std::vector<DeltaShare>& ledger, std::string_view purpose);

struct BoundReport {
  int schema_version = 1;
  BoundFamily family = BoundFamily::KlWasserstein;
  PosteriorKind posterior = PosteriorKind::Dirac;
  std::size_t m = 0;
  double delta = 0.0;
  std::vector<DeltaShare> delta_ledger;
  std::map<std::string, double> terms;
  double value = 0.0;
  std::map<std::string, std::string> provenance;
  std::vector<std::string> notes;
  std::string created_at;
};

/// Re-evaluates the family formula from report.terms.
double recompute_value(const BoundReport& report);

struct CatoniOptions {
  /// Fixed lambda (chosen before seeing data). Empty: data-independent default.
  std::optional<double> lambda;
  /// Union bound over a lambda grid (surcharge ln |grid|); overrides `lambda`.
  std::vector<double> lambda_grid;
  double second_moment = 1.0;
  bool second_moment_plugin = false;
};

struct CertifyOptions {
  BoundFamily family = BoundFamily::KlWasserstein;
  double delta = 0.05;
  PriorGrid prior_grid;
  bool snap_prior_variance = true;
  /// Number of ERM checkpoints the prior mean was picked from (0: data-free prior).
  std::size_t prior_epochs = 0;
  std::size_t mc_samples = 1000;
  std::uint64_t mc_seed = 0;
  bool strict_hoeffding = false;
  double gap_bound = 1.0;
  CatoniOptions catoni;
  bool frobenius_enforced = false;
  /// Reuse a risk estimate already computed for this posterior and data (its
  /// Hoeffding share must match the ledger).
  std::optional<MonteCarloRisk> precomputed_risk;
};

/// Full population-risk certificate for `posterior` on the certification set.
/// `eta` is required for transport families; `lipschitz` carries the surrogate
/// and loss constant (its delta and value are recomputed at the ledger share).
BoundReport certify(const ModelShape& shape, const PosteriorMeasure& posterior,
                    const GaussianMeasure& prior, const std::optional<GaussianMeasure>& eta,
                    const Dataset& cert_data, const LipschitzEstimate& lipschitz,
                    const CertifyOptions& options);

struct EtaChoice {
  double lambda = 1.0;
  GaussianMeasure eta;
  double gap = 0.0;
};

/// Minimises kl_wass_gap over eta = lambda-interpolation of (posterior, prior)
/// for lambda in [0, 1]; both endpoints are always evaluated. For a Dirac
/// posterior eta keeps the std `dirac_eta_std` (defaults to the prior std).
EtaChoice best_interpolating_eta(const PosteriorMeasure& posterior, const GaussianMeasure& prior,
                                 double lip, std::size_t m, double delta,
                                 std::optional<double> dirac_eta_std = std::nullopt);

/// eta_lambda: mean lambda w + (1 - lambda) w_P; variance lambda sigma^2 + (1 - lambda) sigma_P^2
/// (Gaussian posterior) or eta_std^2 (Dirac posterior).
GaussianMeasure interpolate_eta(const PosteriorMeasure& posterior, const GaussianMeasure& prior,
                                double lambda, std::optional<double> dirac_eta_std = std::nullopt);

}  // namespace fgpac

#include "fgpac/measures.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fgpac/kernels.hpp"

namespace fgpac {
namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
    throw std::invalid_argument(std::string(what) + " has non-finite entries");
  }
}

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

double mean_dist_sq(const std::vector<double>& a, const std::vector<double>& b) {
  require_same_dim(a.size(), b.size());
  std::vector<double> diff(a);
  kernels::axpy(-1.0, b, diff);
  return kernels::squared_norm(diff);
}

}  // namespace

GaussianMeasure::GaussianMeasure(std::vector<double> mean, double std)
    : mean_(std::move(mean)), std_(std) {
  if (!(std_ > 0.0) || !std::isfinite(std_)) {
    throw std::invalid_argument("Gaussian std must be positive and finite");
  }
  if (mean_.empty()) throw std::invalid_argument("Gaussian mean must have at least one coordinate");
  require_finite(mean_, "Gaussian mean");
}

DiracMeasure::DiracMeasure(std::vector<double> point) : point_(std::move(point)) {
  if (point_.empty()) throw std::invalid_argument("Dirac point must have at least one coordinate");
  require_finite(point_, "Dirac point");
}

std::size_t dimension(const PosteriorMeasure& m) {
  return std::visit([](const auto& v) { return v.dim(); }, m);
}

bool is_dirac(const PosteriorMeasure& m) { return std::holds_alternative<DiracMeasure>(m); }

double chi_mean(std::size_t d) {
  if (d == 0) return 0.0;
  const double h = static_cast<double>(d);
  return std::sqrt(2.0) * std::exp(std::lgamma((h + 1.0) / 2.0) - std::lgamma(h / 2.0));
}

double kl_gaussian(const GaussianMeasure& q, const GaussianMeasure& p) {
  const double d = static_cast<double>(q.dim());
  const double v = iso::kl(d, mean_dist_sq(q.mean(), p.mean()), q.variance(), p.variance());
  // Cancellation can leave a tiny negative residue when q == p.
  return std::max(v, 0.0);
}

double reverse_kl(const GaussianMeasure& q, const GaussianMeasure& p) { return kl_gaussian(p, q); }

double squared_hellinger(const GaussianMeasure& q, const GaussianMeasure& p) {
  const double d = static_cast<double>(q.dim());
  const double v =
      iso::squared_hellinger(d, mean_dist_sq(q.mean(), p.mean()), q.variance(), p.variance());
  return std::clamp(v, 0.0, 1.0);
}

double tv_upper(const GaussianMeasure& q, const GaussianMeasure& p) {
  const double d = static_cast<double>(q.dim());
  const double v = iso::tv_upper(d, mean_dist_sq(q.mean(), p.mean()), q.variance(), p.variance());
  return std::clamp(v, 0.0, 1.0);
}

double w1_dirac_to_gaussian(const DiracMeasure& rho, const GaussianMeasure& eta) {
  const double dist = std::sqrt(mean_dist_sq(rho.point(), eta.mean()));
  return iso::w1_dirac(dist, eta.std(), chi_mean(eta.dim()));
}

double w2_gaussian(const GaussianMeasure& rho, const GaussianMeasure& eta) {
  const double d = static_cast<double>(rho.dim());
  return iso::w2(d, mean_dist_sq(rho.mean(), eta.mean()), rho.std(), eta.std());
}

}  // namespace fgpac

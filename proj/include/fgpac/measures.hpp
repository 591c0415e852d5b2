#pragma once

// Measures over the flat parameter space and the closed-form divergences and
// transport distances between them. Gaussians are isotropic: N(mean, std^2 I_d).

#include <cmath>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace fgpac {

class GaussianMeasure {
 public:
  GaussianMeasure(std::vector<double> mean, double std);

  const std::vector<double>& mean() const { return mean_; }
  double std() const { return std_; }
  double variance() const { return std_ * std_; }
  std::size_t dim() const { return mean_.size(); }

 private:
  std::vector<double> mean_;
  double std_;
};

class DiracMeasure {
 public:
  explicit DiracMeasure(std::vector<double> point);

  const std::vector<double>& point() const { return point_; }
  std::size_t dim() const { return point_.size(); }

 private:
  std::vector<double> point_;
};

using PosteriorMeasure = std::variant<DiracMeasure, GaussianMeasure>;

std::size_t dimension(const PosteriorMeasure& m);
bool is_dirac(const PosteriorMeasure& m);

/// E||eps|| for eps ~ N(0, I_d): sqrt(2) Gamma((d+1)/2) / Gamma(d/2), via log-gamma.
double chi_mean(std::size_t d);

double kl_gaussian(const GaussianMeasure& q, const GaussianMeasure& p);
/// KL(p || q); bitwise equal to kl_gaussian(p, q).
double reverse_kl(const GaussianMeasure& q, const GaussianMeasure& p);
/// 1 - Bhattacharyya coefficient, in [0, 1].
double squared_hellinger(const GaussianMeasure& q, const GaussianMeasure& p);
/// Upper bound on TV: exact when the stds agree, Pinsker (capped at 1) otherwise.
double tv_upper(const GaussianMeasure& q, const GaussianMeasure& p);
/// Upper bound on W1(delta_w, eta) through the triangle inequality.
double w1_dirac_to_gaussian(const DiracMeasure& rho, const GaussianMeasure& eta);
/// Exact W2 between isotropic Gaussians; upper-bounds W1.
double w2_gaussian(const GaussianMeasure& rho, const GaussianMeasure& eta);

// Isotropic closed forms written over sufficient statistics. They are generic
// in the scalar type so the trainer can differentiate the same expressions the
// certificate evaluates.
namespace iso {

template <class T>
T kl(double d, const T& mean_dist_sq, const T& var_q, const T& var_p) {
  using std::log;
  return 0.5 * (d * var_q / var_p - d + mean_dist_sq / var_p + d * log(var_p / var_q));
}

template <class T>
T squared_hellinger(double d, const T& mean_dist_sq, const T& var_q, const T& var_p) {
  using std::expm1;
  using std::log;
  const T sum = var_q + var_p;
  const T exponent = (d / 4.0) * (log(var_q) + log(var_p)) - (d / 2.0) * log(0.5 * sum) -
                     mean_dist_sq / (4.0 * sum);
  return -expm1(exponent);
}

template <class T>
T tv_upper(double d, const T& mean_dist_sq, const T& var_q, const T& var_p) {
  using std::erf;
  using std::sqrt;
  if (var_q == var_p) {
    // 2 Phi(r / 2) - 1 = erf(r / (2 sqrt 2)) with r = ||dmu|| / sigma.
    const T r = sqrt(mean_dist_sq / var_q);
    return erf(r / (2.0 * std::sqrt(2.0)));
  }
  const T half_kl = 0.5 * kl(d, mean_dist_sq, var_q, var_p);
  if (half_kl >= 1.0) return T(1.0);
  return sqrt(half_kl);
}

template <class T>
T w1_dirac(const T& mean_dist, const T& std_eta, double chi) {
  return mean_dist + std_eta * chi;
}

template <class T>
T w2(double d, const T& mean_dist_sq, const T& std_a, const T& std_b) {
  using std::sqrt;
  const T ds = std_a - std_b;
  return sqrt(mean_dist_sq + d * ds * ds);
}

}  // namespace iso

}  // namespace fgpac

#include "fgpac/cocob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fgpac {

CocobOptimizer::CocobOptimizer(std::span<const double> initial, double alpha, double eps)
    : w1_(initial.begin(), initial.end()),
      max_grad_(initial.size(), eps),
      abs_sum_(initial.size(), 0.0),
      grad_sum_(initial.size(), 0.0),
      reward_(initial.size(), 0.0),
      alpha_(alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("COCOB alpha must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("COCOB eps must be positive");
}

void CocobOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != w1_.size() || grad.size() != w1_.size()) {
    throw std::invalid_argument("COCOB dimension mismatch");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::domain_error("non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    max_grad_[i] = std::max(max_grad_[i], std::abs(g));
    abs_sum_[i] += std::abs(g);
    reward_[i] = std::max(reward_[i] - (params[i] - w1_[i]) * g, 0.0);
    grad_sum_[i] += g;
    const double l = max_grad_[i];
    const double denom = l * std::max(abs_sum_[i] + l, alpha_ * l);
    params[i] = w1_[i] - grad_sum_[i] / denom * (l + reward_[i]);
  }
  ++steps_;
}

}  // namespace fgpac

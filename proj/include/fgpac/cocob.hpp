#pragma once

// COCOB-Backprop: per-coordinate coin betting without a learning rate.
// Each coordinate bets a fraction of (initial wealth + reward) against the
// running sum of its gradients, scaled by the largest gradient seen so far.

#include <cstddef>
#include <span>
#include <vector>

namespace fgpac {

class CocobOptimizer {
 public:
  /// `initial` is the reference point w_1 every bet is measured from.
  explicit CocobOptimizer(std::span<const double> initial, double alpha = 10.0,
                          double eps = 1e-8);

  /// Minimisation step: reads the current point `params`, writes the next one.
  /// Throws std::domain_error on a non-finite gradient entry.
  void step(std::span<double> params, std::span<const double> grad);

  std::size_t dim() const { return w1_.size(); }
  double alpha() const { return alpha_; }
  std::size_t steps() const { return steps_; }

  const std::vector<double>& max_grad() const { return max_grad_; }
  const std::vector<double>& abs_grad_sum() const { return abs_sum_; }
  const std::vector<double>& grad_sum() const { return grad_sum_; }
  const std::vector<double>& reward() const { return reward_; }

 private:
  std::vector<double> w1_;
  std::vector<double> max_grad_;
  std::vector<double> abs_sum_;
  std::vector<double> grad_sum_;
  std::vector<double> reward_;
  double alpha_;
  std::size_t steps_ = 0;
};

}  // namespace fgpac

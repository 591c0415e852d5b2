#include "fgpac/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "fgpac/kernels.hpp"

namespace fgpac {

ModelShape ModelShape::linear(std::size_t input_dim, int class_count, double margin_scale) {
  ModelShape s;
  s.kind = ModelKind::Linear;
  s.input_dim = input_dim;
  s.class_count = class_count;
  s.margin_scale = margin_scale;
  s.validate();
  return s;
}

ModelShape ModelShape::mlp(std::size_t input_dim, int class_count, std::size_t hidden_width,
                           std::size_t depth, double margin_scale, double leaky_slope) {
  ModelShape s;
  s.kind = ModelKind::Mlp;
  s.input_dim = input_dim;
  s.class_count = class_count;
  s.hidden_width = hidden_width;
  s.depth = depth;
  s.margin_scale = margin_scale;
  s.leaky_slope = leaky_slope;
  s.validate();
  return s;
}

void ModelShape::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input dimension must be >= 1");
  if (class_count < 2) throw std::invalid_argument("class count must be >= 2");
  if (!(margin_scale > 0.0) || !std::isfinite(margin_scale)) {
    throw std::invalid_argument("margin scale must be positive");
  }
  if (kind == ModelKind::Mlp) {
    if (hidden_width < 1 || depth < 1) {
      throw std::invalid_argument("Mlp needs hidden width >= 1 and depth >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
      throw std::invalid_argument("leaky slope must lie in (0, 1)");
    }
  }
}

std::size_t ModelShape::param_count() const {
  const auto y = static_cast<std::size_t>(class_count);
  if (kind == ModelKind::Linear) return y * input_dim + y;
  const std::size_t n = hidden_width;
  return n * input_dim + n + (depth - 1) * (n * n + n) + y * n + y;
}

std::vector<LayerSlot> layer_slots(const ModelShape& shape) {
  const auto y = static_cast<std::size_t>(shape.class_count);
  const std::size_t k = shape.kind == ModelKind::Mlp ? shape.depth : 0;
  const std::size_t width = shape.hidden_width;

  std::vector<LayerSlot> slots(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    slots[i].rows = width;
    slots[i].cols = i == 0 ? shape.input_dim : width;
  }
  slots[k].rows = y;
  slots[k].cols = k == 0 ? shape.input_dim : width;

  // Weights: output layer first, then hidden layers from the last to the first.
  std::size_t off = 0;
  for (std::size_t j = 0; j <= k; ++j) {
    LayerSlot& s = slots[k - j];
    s.weight_offset = off;
    off += s.rows * s.cols;
  }
  for (std::size_t j = 0; j <= k; ++j) {
    LayerSlot& s = slots[k - j];
    s.bias_offset = off;
    off += s.rows;
  }
  return slots;
}

ModelParams::ModelParams(ModelShape shape_in, std::vector<double> theta_in)
    : shape(shape_in), theta(std::move(theta_in)) {
  shape.validate();
  if (theta.size() != shape.param_count()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, shape expects " + std::to_string(shape.param_count()));
  }
}

std::vector<DenseLayer> unpack(const ModelParams& params) {
  std::vector<DenseLayer> out;
  for (const LayerSlot& s : layer_slots(params.shape)) {
    DenseLayer l;
    l.rows = s.rows;
    l.cols = s.cols;
    const auto* w = params.theta.data() + s.weight_offset;
    const auto* b = params.theta.data() + s.bias_offset;
    l.weight.assign(w, w + s.rows * s.cols);
    l.bias.assign(b, b + s.rows);
    out.push_back(std::move(l));
  }
  return out;
}

ModelParams pack(const ModelShape& shape, const std::vector<DenseLayer>& layers) {
  const auto slots = layer_slots(shape);
  if (layers.size() != slots.size()) throw std::invalid_argument("layer count mismatch");
  std::vector<double> theta(shape.param_count());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const LayerSlot& s = slots[i];
    const DenseLayer& l = layers[i];
    if (l.rows != s.rows || l.cols != s.cols || l.weight.size() != s.rows * s.cols ||
        l.bias.size() != s.rows) {
      throw std::invalid_argument("layer " + std::to_string(i) + " has the wrong shape");
    }
    std::copy(l.weight.begin(), l.weight.end(), theta.begin() + static_cast<std::ptrdiff_t>(s.weight_offset));
    std::copy(l.bias.begin(), l.bias.end(), theta.begin() + static_cast<std::ptrdiff_t>(s.bias_offset));
  }
  return ModelParams(shape, std::move(theta));
}

ModelEvaluator::ModelEvaluator(const ModelShape& shape) : shape_(shape), slots_(layer_slots(shape)) {
  shape_.validate();
  const std::size_t k = slots_.size() - 1;
  pre_.resize(k);
  post_.resize(k);
  post_norm_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    pre_[i].resize(slots_[i].rows);
    post_[i].resize(slots_[i].rows);
  }
  out_.resize(static_cast<std::size_t>(shape.class_count));
  grad_out_.resize(out_.size());
  const std::size_t widest = std::max(shape.hidden_width, shape.input_dim);
  grad_h_.resize(widest);
  grad_a_.resize(widest);
}

void ModelEvaluator::forward(std::span<const double> theta, std::span<const double> x) {
  if (theta.size() != shape_.param_count()) throw std::invalid_argument("theta dimension mismatch");
  if (x.size() != shape_.input_dim) throw std::invalid_argument("input dimension mismatch");
  const auto& k = kernels::table();
  const double slope = shape_.leaky_slope;
  kink_margin_ = std::numeric_limits<double>::infinity();

  const double* h = x.data();
  for (std::size_t i = 0; i + 1 < slots_.size(); ++i) {
    const LayerSlot& s = slots_[i];
    k.gemv(theta.data() + s.weight_offset, s.rows, s.cols, h, theta.data() + s.bias_offset,
           pre_[i].data());
    auto& post = post_[i];
    for (std::size_t r = 0; r < s.rows; ++r) {
      const double a = pre_[i][r];
      kink_margin_ = std::min(kink_margin_, std::abs(a));
      post[r] = a > 0.0 ? a : slope * a;
    }
    const double norm = std::sqrt(k.squared_norm(post.data(), post.size()));
    post_norm_[i] = norm;
    kink_margin_ = std::min(kink_margin_, std::abs(norm - 1.0));
    if (norm > 1.0) {
      for (double& v : post) v /= norm;
    }
    h = post.data();
  }
  const LayerSlot& o = slots_.back();
  k.gemv(theta.data() + o.weight_offset, o.rows, o.cols, h, theta.data() + o.bias_offset,
         out_.data());
}

std::span<const double> ModelEvaluator::scores(std::span<const double> theta,
                                               std::span<const double> x) {
  forward(theta, x);
  return out_;
}

std::span<const double> ModelEvaluator::hidden(std::size_t layer) const { return post_.at(layer); }

double ModelEvaluator::loss(std::span<const double> theta, std::span<const double> x, int y) {
  forward(theta, x);
  return margin_loss(out_, y, shape_.margin_scale);
}

double ModelEvaluator::loss_and_grad(std::span<const double> theta, std::span<const double> x,
                                     int y, double scale, std::span<double> grad) {
  if (grad.size() != theta.size()) throw std::invalid_argument("gradient dimension mismatch");
  forward(theta, x);
  const auto& k = kernels::table();
  const std::size_t n_classes = out_.size();
  if (y < 0 || static_cast<std::size_t>(y) >= n_classes) throw std::out_of_range("label out of range");

  const double alpha = shape_.margin_scale;
  const double inv_y = 1.0 / static_cast<double>(n_classes);
  double raw = 0.0;
  std::fill(grad_out_.begin(), grad_out_.end(), 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (c == static_cast<std::size_t>(y)) continue;
    const double t = 1.0 - alpha * (out_[y] - out_[c]);
    kink_margin_ = std::min(kink_margin_, std::abs(t));
    if (t > 0.0) {
      raw += t;
      grad_out_[c] += alpha * inv_y;
      grad_out_[y] -= alpha * inv_y;
    }
  }
  raw *= inv_y;
  kink_margin_ = std::min(kink_margin_, std::abs(raw - 1.0));
  if (raw >= 1.0) return 1.0;

  // Output layer.
  const LayerSlot& o = slots_.back();
  const double* h_last = slots_.size() == 1 ? x.data() : post_.back().data();
  k.rank1_acc(grad.data() + o.weight_offset, o.rows, o.cols, scale, grad_out_.data(), h_last);
  k.axpy(scale, grad_out_.data(), grad.data() + o.bias_offset, o.rows);
  if (slots_.size() == 1) return raw;

  std::fill(grad_h_.begin(), grad_h_.begin() + static_cast<std::ptrdiff_t>(o.cols), 0.0);
  k.gemv_t_acc(theta.data() + o.weight_offset, o.rows, o.cols, grad_out_.data(), grad_h_.data());

  const double slope = shape_.leaky_slope;
  for (std::size_t i = slots_.size() - 1; i-- > 0;) {
    const LayerSlot& s = slots_[i];
    const double* h = post_[i].data();
    const double norm = post_norm_[i];
    if (norm > 1.0) {
      const double proj = k.dot(h, grad_h_.data(), s.rows);
      for (std::size_t r = 0; r < s.rows; ++r) grad_a_[r] = (grad_h_[r] - h[r] * proj) / norm;
    } else {
      std::copy_n(grad_h_.begin(), s.rows, grad_a_.begin());
    }
    for (std::size_t r = 0; r < s.rows; ++r) {
      if (!(pre_[i][r] > 0.0)) grad_a_[r] *= slope;
    }
    const double* h_prev = i == 0 ? x.data() : post_[i - 1].data();
    k.rank1_acc(grad.data() + s.weight_offset, s.rows, s.cols, scale, grad_a_.data(), h_prev);
    k.axpy(scale, grad_a_.data(), grad.data() + s.bias_offset, s.rows);
    if (i > 0) {
      std::fill(grad_h_.begin(), grad_h_.begin() + static_cast<std::ptrdiff_t>(s.cols), 0.0);
      k.gemv_t_acc(theta.data() + s.weight_offset, s.rows, s.cols, grad_a_.data(), grad_h_.data());
    }
  }
  return raw;
}

std::vector<double> predict(const ModelParams& params, std::span<const double> x) {
  ModelEvaluator ev(params.shape);
  const auto s = ev.scores(params.theta, x);
  return {s.begin(), s.end()};
}

double margin_loss(std::span<const double> scores, int y, double alpha) {
  if (y < 0 || static_cast<std::size_t>(y) >= scores.size()) {
    throw std::out_of_range("label " + std::to_string(y) + " out of range");
  }
  double raw = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == static_cast<std::size_t>(y)) continue;
    raw += std::max(0.0, 1.0 - alpha * (scores[y] - scores[c]));
  }
  return std::min(1.0, raw / static_cast<double>(scores.size()));
}

double empirical_risk(std::span<const double> theta, const ModelShape& shape, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empirical risk of an empty dataset");
  ModelEvaluator ev(shape);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += ev.loss(theta, data.row(i), data.label(i));
  return sum / static_cast<double>(data.size());
}

double empirical_risk(const ModelParams& params, const Dataset& data) {
  return empirical_risk(params.theta, params.shape, data);
}

std::vector<double> loss_gradient(const ModelParams& params, const ExampleView& example) {
  ModelEvaluator ev(params.shape);
  std::vector<double> grad(params.dim(), 0.0);
  ev.loss_and_grad(params.theta, example.x, example.label, 1.0, grad);
  return grad;
}

double loss_lipschitz_const(const ModelShape& shape) {
  shape.validate();
  if (shape.kind == ModelKind::Linear) return std::sqrt(2.0) * shape.margin_scale;
  return shape.margin_scale * std::sqrt(2.0 * (static_cast<double>(shape.depth) + 2.0));
}

ModelParams init_linear(const ModelShape& shape) {
  if (shape.kind != ModelKind::Linear) throw std::invalid_argument("init_linear needs a linear shape");
  return ModelParams(shape, std::vector<double>(shape.param_count(), 0.0));
}

ModelParams init_mlp(const ModelShape& shape, std::uint64_t seed) {
  if (shape.kind != ModelKind::Mlp) throw std::invalid_argument("init_mlp needs an Mlp shape");
  const auto slots = layer_slots(shape);
  std::vector<double> theta(shape.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.04);
  // Weight matrices occupy [0, first bias offset) in the flat layout.
  const std::size_t n_weights = slots.back().bias_offset;
  for (std::size_t i = 0; i < n_weights; ++i) theta[i] = std::clamp(normal(rng), -0.08, 0.08);
  const LayerSlot& first = slots.front();
  std::fill_n(theta.begin() + static_cast<std::ptrdiff_t>(first.bias_offset), first.rows, 0.1);
  return ModelParams(shape, std::move(theta));
}

void project_weights_frobenius(const ModelShape& shape, std::span<double> theta) {
  for (const LayerSlot& s : layer_slots(shape)) {
    std::span<double> w = theta.subspan(s.weight_offset, s.rows * s.cols);
    const double norm = std::sqrt(kernels::squared_norm(w));
    if (norm > 1.0) {
      for (double& v : w) v /= norm;
    }
  }
}

bool weights_within_unit_frobenius(const ModelShape& shape, std::span<const double> theta) {
  for (const LayerSlot& s : layer_slots(shape)) {
    if (kernels::squared_norm(theta.subspan(s.weight_offset, s.rows * s.cols)) > 1.0 + 1e-12) {
      return false;
    }
  }
  return true;
}

}  // namespace fgpac

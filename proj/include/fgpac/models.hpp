#pragma once

// Linear and projected-MLP score functions, the clamped multiclass margin
// loss, and a hand-derived reverse pass over the flat parameter vector.
//
// Flat layout (row-major matrices):
//   Linear: [W (|Y| x n), b (|Y|)]
//   Mlp:    [W (|Y| x N), W_K, ..., W_2 (N x N), W_1 (N x n), b (|Y|), b_K, ..., b_1 (N)]

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fgpac/data.hpp"

namespace fgpac {

enum class ModelKind { Linear, Mlp };

struct ModelShape {
  ModelKind kind = ModelKind::Linear;
  std::size_t input_dim = 1;
  int class_count = 2;
  std::size_t hidden_width = 0;  // Mlp only
  std::size_t depth = 0;         // Mlp only
  double margin_scale = 25.0;
  double leaky_slope = 0.01;

  static ModelShape linear(std::size_t input_dim, int class_count, double margin_scale = 25.0);
  static ModelShape mlp(std::size_t input_dim, int class_count, std::size_t hidden_width,
                        std::size_t depth, double margin_scale = 250.0, double leaky_slope = 0.01);

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  std::size_t param_count() const;
  bool operator==(const ModelShape&) const = default;
};

/// One affine map inside the flat vector.
struct LayerSlot {
  std::size_t rows;
  std::size_t cols;
  std::size_t weight_offset;
  std::size_t bias_offset;
};

/// Hidden layers 1..K in forward order, followed by the output layer.
std::vector<LayerSlot> layer_slots(const ModelShape& shape);

struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weight;  // rows x cols
  std::vector<double> bias;    // rows
  bool operator==(const DenseLayer&) const = default;
};

struct ModelParams {
  ModelShape shape;
  std::vector<double> theta;

  ModelParams(ModelShape shape, std::vector<double> theta);
  std::size_t dim() const { return theta.size(); }
};

/// Structured copy of the weights, in the order of layer_slots().
std::vector<DenseLayer> unpack(const ModelParams& params);
ModelParams pack(const ModelShape& shape, const std::vector<DenseLayer>& layers);

/// Reusable buffers for forward/backward passes. Not thread-safe; use one per thread.
class ModelEvaluator {
 public:
  explicit ModelEvaluator(const ModelShape& shape);

  const ModelShape& shape() const { return shape_; }

  /// Scores h_theta(x); the returned span aliases internal storage.
  std::span<const double> scores(std::span<const double> theta, std::span<const double> x);

  double loss(std::span<const double> theta, std::span<const double> x, int y);

  /// Adds scale * d loss / d theta into `grad` and returns the loss.
  double loss_and_grad(std::span<const double> theta, std::span<const double> x, int y,
                       double scale, std::span<double> grad);

  /// Smallest distance of any kink argument (hinge, clamp, leaky ReLU, projection) from its
  /// kink at the last evaluated point. Used to pick points where the loss is differentiable.
  double kink_margin() const { return kink_margin_; }

  /// Hidden activations h^1..h^K of the last forward pass.
  std::span<const double> hidden(std::size_t layer) const;

 private:
  void forward(std::span<const double> theta, std::span<const double> x);

  ModelShape shape_;
  std::vector<LayerSlot> slots_;
  std::vector<std::vector<double>> pre_;    // W_i h + b_i
  std::vector<std::vector<double>> post_;   // projected activations
  std::vector<double> post_norm_;           // ||leaky(pre)|| per layer
  std::vector<double> out_;
  std::vector<double> grad_out_;
  std::vector<double> grad_h_;
  std::vector<double> grad_a_;
  double kink_margin_ = 0.0;
};

std::vector<double> predict(const ModelParams& params, std::span<const double> x);

/// min(1, (1/|Y|) sum_{y' != y} max(0, 1 - alpha (s[y] - s[y']))).
double margin_loss(std::span<const double> scores, int y, double alpha);

double empirical_risk(const ModelParams& params, const Dataset& data);
double empirical_risk(std::span<const double> theta, const ModelShape& shape, const Dataset& data);

std::vector<double> loss_gradient(const ModelParams& params, const ExampleView& example);

/// Lipschitz constant of the loss in the parameters (Mlp: on the set where every
/// weight matrix has Frobenius norm at most 1).
double loss_lipschitz_const(const ModelShape& shape);

ModelParams init_linear(const ModelShape& shape);
ModelParams init_mlp(const ModelShape& shape, std::uint64_t seed);

/// Rescales every weight matrix (not biases) to Frobenius norm <= 1.
void project_weights_frobenius(const ModelShape& shape, std::span<double> theta);
bool weights_within_unit_frobenius(const ModelShape& shape, std::span<const double> theta);

}  // namespace fgpac

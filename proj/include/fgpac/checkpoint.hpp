#pragma once

// Binary checkpoint container for a trained posterior. Layout (all fields
// little-endian, see docs/checkpoint_format.md):
//
//   char[8]  magic "FGPACCKP"
//   u32      version (1)
//   u32      model kind (0 linear, 1 mlp)
//   u64      input_dim, class_count, hidden_width, depth
//   f64      margin_scale, leaky_slope
//   u64      d, then f64[d] theta
//   u32      posterior kind (0 dirac, 1 gaussian), f64 posterior std
//   f64      eta lambda, eta std
//   f64      prior std, u64 prior mean length (0 or d), f64[...] prior mean
//   u64      prior epochs (0 for a data-free prior)

#include <cstddef>
#include <filesystem>
#include <string>

#include "fgpac/bounds.hpp"
#include "fgpac/measures.hpp"
#include "fgpac/models.hpp"

namespace fgpac {

struct Checkpoint {
  ModelParams params;
  PosteriorKind posterior_kind = PosteriorKind::Dirac;
  double posterior_std = 0.0;
  double eta_lambda = 1.0;
  double eta_std = 1.0;
  GaussianMeasure prior;
  std::size_t prior_epochs = 0;

  PosteriorMeasure posterior() const;
  GaussianMeasure eta() const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fgpac

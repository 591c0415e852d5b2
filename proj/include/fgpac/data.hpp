#pragma once

// Labelled datasets with features in the unit Euclidean ball, loaders for the
// IDX and sparse "label idx:val" formats, and deterministic splits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fgpac {

enum class SplitTag { Full, Cert, Prior, Test };

std::string_view to_string(SplitTag tag);

struct ExampleView {
  std::span<const double> x;
  int label;
};

class Dataset {
 public:
  Dataset() = default;
  /// Validates labels and the unit-ball invariant; `features` is row-major m x n.
  Dataset(std::vector<double> features, std::size_t cols, std::vector<int> labels,
          int class_count, SplitTag tag = SplitTag::Full, std::uint64_t fingerprint = 0);

  std::size_t size() const { return labels_.size(); }
  std::size_t cols() const { return cols_; }
  int class_count() const { return class_count_; }
  SplitTag tag() const { return tag_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  /// Row indices into the source dataset this one was cut from (identity for loaded data).
  const std::vector<std::size_t>& source_indices() const { return source_indices_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols_, cols_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  ExampleView example(std::size_t i) const { return {row(i), labels_[i]}; }
  const std::vector<double>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Rows `indices` as a new dataset carrying `tag`.
  Dataset subset(std::span<const std::size_t> indices, SplitTag tag) const;

 private:
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<std::size_t> source_indices_;
  std::size_t cols_ = 0;
  int class_count_ = 0;
  SplitTag tag_ = SplitTag::Full;
  std::uint64_t fingerprint_ = 0;
};

/// FNV-1a 64-bit hash, used as the content fingerprint of source files.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Scales `row` in place onto the unit ball: v / max(1, ||v||).
void project_to_unit_ball(std::span<double> row);

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct SparseTextOptions {
  /// Per-feature min-max scaling to [0, 1] before the row projection.
  bool minmax = true;
};

/// Parses "label idx:val idx:val ..." lines with 1-based indices.
Dataset load_sparse_text(const std::filesystem::path& path, std::size_t n_features,
                         const SparseTextOptions& options = {});
Dataset parse_sparse_text(std::string_view text, std::size_t n_features,
                          const SparseTextOptions& options = {});

struct SplitPair {
  Dataset first;
  Dataset second;
};

/// Seeded 50/50 split; the extra element of an odd-sized set goes to the first (train) half.
SplitPair split_half(const Dataset& data, std::uint64_t seed);
/// Seeded split into (prior set, certification set); the prior set gets round(fraction * m) rows.
SplitPair split_prior(const Dataset& train, double fraction, std::uint64_t seed);

/// Gaussian clusters around random unit directions, shrunk into the unit ball.
class BlobDistribution {
 public:
  BlobDistribution(std::size_t n, int class_count, double separation, std::uint64_t seed);

  /// m points with balanced labels (label i mod |Y|, then shuffled).
  Dataset sample(std::size_t m, std::uint64_t seed) const;

  std::size_t dim() const { return n_; }
  int class_count() const { return class_count_; }

 private:
  std::size_t n_;
  int class_count_;
  double separation_;
  std::vector<double> centers_;
};

Dataset synth_gaussian_blobs(std::size_t m, std::size_t n, int class_count, double separation,
                             std::uint64_t seed);

}  // namespace fgpac

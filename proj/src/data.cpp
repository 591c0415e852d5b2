#include "fgpac/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fgpac/kernels.hpp"

namespace fgpac {
namespace {

constexpr double kBallSlack = 1e-9;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > b.size()) throw std::runtime_error("truncated IDX header in " + path.string());
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::vector<std::size_t> permutation(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view token, std::size_t line_no) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("malformed number '" + std::string(token) + "' on line " +
                             std::to_string(line_no));
  }
  return v;
}

}  // namespace

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Full: return "full";
    case SplitTag::Cert: return "cert";
    case SplitTag::Prior: return "prior";
    case SplitTag::Test: return "test";
  }
  return "full";
}

Dataset::Dataset(std::vector<double> features, std::size_t cols, std::vector<int> labels,
                 int class_count, SplitTag tag, std::uint64_t fingerprint)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      cols_(cols),
      class_count_(class_count),
      tag_(tag),
      fingerprint_(fingerprint) {
  if (labels_.empty()) throw std::invalid_argument("dataset must contain at least one example");
  if (cols_ == 0 || features_.size() != labels_.size() * cols_) {
    throw std::invalid_argument("feature matrix size does not match labels x columns");
  }
  if (class_count_ < 1) throw std::invalid_argument("class count must be positive");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= class_count_) {
      throw std::invalid_argument("label out of range at row " + std::to_string(i));
    }
    if (std::sqrt(kernels::squared_norm(row(i))) > 1.0 + kBallSlack) {
      throw std::invalid_argument("row " + std::to_string(i) + " lies outside the unit ball");
    }
  }
  source_indices_.resize(labels_.size());
  std::iota(source_indices_.begin(), source_indices_.end(), std::size_t{0});
}

Dataset Dataset::subset(std::span<const std::size_t> indices, SplitTag tag) const {
  std::vector<double> feats;
  feats.reserve(indices.size() * cols_);
  std::vector<int> labs;
  labs.reserve(indices.size());
  std::vector<std::size_t> src;
  src.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("subset index out of range");
    const auto r = row(i);
    feats.insert(feats.end(), r.begin(), r.end());
    labs.push_back(labels_[i]);
    src.push_back(source_indices_[i]);
  }
  Dataset out(std::move(feats), cols_, std::move(labs), class_count_, tag, fingerprint_);
  out.source_indices_ = std::move(src);
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void project_to_unit_ball(std::span<double> row) {
  const double norm = std::sqrt(kernels::squared_norm(row));
  if (norm > 1.0) {
    for (double& v : row) v /= norm;
  }
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto img = read_bytes(images_path);
  const auto lab = read_bytes(labels_path);

  if (read_be32(img, 0, images_path) != 0x00000803u) {
    throw std::runtime_error("bad IDX image magic in " + images_path.string());
  }
  if (read_be32(lab, 0, labels_path) != 0x00000801u) {
    throw std::runtime_error("bad IDX label magic in " + labels_path.string());
  }
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (count != n_labels) {
    throw std::runtime_error("IDX image count " + std::to_string(count) +
                             " does not match label count " + std::to_string(n_labels));
  }
  const std::size_t n = rows * cols;
  if (img.size() < 16 + count * n) throw std::runtime_error("truncated IDX images " + images_path.string());
  if (lab.size() < 8 + count) throw std::runtime_error("truncated IDX labels " + labels_path.string());

  std::vector<double> feats(count * n);
  for (std::size_t i = 0; i < count * n; ++i) feats[i] = img[16 + i] / 255.0;
  std::vector<int> labels(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = lab[8 + i];
    max_label = std::max(max_label, labels[i]);
  }
  for (std::size_t i = 0; i < count; ++i) project_to_unit_ball({feats.data() + i * n, n});

  const auto fp = fnv1a64(lab, fnv1a64(img));
  return Dataset(std::move(feats), n, std::move(labels), std::max(2, max_label + 1),
                 SplitTag::Full, fp);
}

Dataset parse_sparse_text(std::string_view text, std::size_t n_features,
                          const SparseTextOptions& options) {
  if (n_features == 0) throw std::invalid_argument("feature count must be positive");
  const std::uint64_t fingerprint = fnv1a64(
      {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  std::vector<double> feats;
  std::vector<double> raw_labels;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::vector<double> row(n_features, 0.0);
    std::string_view rest = line;
    const auto sp = rest.find_first_of(" \t");
    raw_labels.push_back(parse_double(rest.substr(0, sp), line_no));
    rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));
    while (!rest.empty()) {
      const auto end = rest.find_first_of(" \t");
      const std::string_view tok = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{} : trim(rest.substr(end));
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw std::runtime_error("malformed token '" + std::string(tok) + "' on line " +
                                 std::to_string(line_no));
      }
      const double idx = parse_double(tok.substr(0, colon), line_no);
      if (idx < 1.0 || idx > static_cast<double>(n_features) || idx != std::floor(idx)) {
        throw std::runtime_error("feature index " + std::string(tok.substr(0, colon)) +
                                 " out of range on line " + std::to_string(line_no));
      }
      row[static_cast<std::size_t>(idx) - 1] = parse_double(tok.substr(colon + 1), line_no);
    }
    feats.insert(feats.end(), row.begin(), row.end());
  }
  if (raw_labels.empty()) throw std::runtime_error("no examples in sparse text input");
  const std::size_t m = raw_labels.size();

  if (options.minmax) {
    for (std::size_t j = 0; j < n_features; ++j) {
      double lo = feats[j];
      double hi = feats[j];
      for (std::size_t i = 1; i < m; ++i) {
        lo = std::min(lo, feats[i * n_features + j]);
        hi = std::max(hi, feats[i * n_features + j]);
      }
      for (std::size_t i = 0; i < m; ++i) {
        double& v = feats[i * n_features + j];
        // Constant columns carry no information and are zeroed.
        v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) project_to_unit_ball({feats.data() + i * n_features, n_features});

  std::map<double, int> remap;
  for (double l : raw_labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [k, v] : remap) v = next++;
  std::vector<int> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = remap.at(raw_labels[i]);

  return Dataset(std::move(feats), n_features, std::move(labels),
                 std::max(2, static_cast<int>(remap.size())), SplitTag::Full, fingerprint);
}

Dataset load_sparse_text(const std::filesystem::path& path, std::size_t n_features,
                         const SparseTextOptions& options) {
  const auto bytes = read_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return parse_sparse_text(text, n_features, options);
}

SplitPair split_half(const Dataset& data, std::uint64_t seed) {
  const std::size_t m = data.size();
  if (m < 2) throw std::invalid_argument("split_half needs at least two examples");
  const auto perm = permutation(m, seed);
  const std::size_t n_train = (m + 1) / 2;
  const std::span<const std::size_t> all(perm);
  return {data.subset(all.first(n_train), SplitTag::Cert),
          data.subset(all.subspan(n_train), SplitTag::Test)};
}

SplitPair split_prior(const Dataset& train, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("prior split fraction must lie in (0, 1)");
  }
  const std::size_t m = train.size();
  const auto n_prior = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  if (n_prior == 0 || n_prior >= m) {
    throw std::invalid_argument("prior split leaves an empty side");
  }
  const auto perm = permutation(m, seed);
  const std::span<const std::size_t> all(perm);
  return {train.subset(all.first(n_prior), SplitTag::Prior),
          train.subset(all.subspan(n_prior), SplitTag::Cert)};
}

BlobDistribution::BlobDistribution(std::size_t n, int class_count, double separation,
                                   std::uint64_t seed)
    : n_(n), class_count_(class_count), separation_(separation) {
  if (n == 0 || class_count < 2 || separation < 0.0) {
    throw std::invalid_argument("invalid blob distribution parameters");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  centers_.resize(n * static_cast<std::size_t>(class_count));
  for (int k = 0; k < class_count; ++k) {
    std::span<double> c(centers_.data() + static_cast<std::size_t>(k) * n, n);
    for (double& v : c) v = normal(rng);
    const double norm = std::sqrt(kernels::squared_norm(c));
    for (double& v : c) v = separation * v / norm;
  }
}

Dataset BlobDistribution::sample(std::size_t m, std::uint64_t seed) const {
  if (m < static_cast<std::size_t>(class_count_)) {
    throw std::invalid_argument("need at least one example per class");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<int> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(class_count_));
  std::shuffle(labels.begin(), labels.end(), rng);

  const double noise = 1.0 / std::sqrt(static_cast<double>(n_));
  const double shrink = 1.0 / (1.0 + separation_);
  std::vector<double> feats(m * n_);
  for (std::size_t i = 0; i < m; ++i) {
    const double* c = centers_.data() + static_cast<std::size_t>(labels[i]) * n_;
    std::span<double> row(feats.data() + i * n_, n_);
    for (std::size_t j = 0; j < n_; ++j) row[j] = (c[j] + noise * normal(rng)) * shrink;
    project_to_unit_ball(row);
  }
  return Dataset(std::move(feats), n_, std::move(labels), class_count_);
}

Dataset synth_gaussian_blobs(std::size_t m, std::size_t n, int class_count, double separation,
                             std::uint64_t seed) {
  return BlobDistribution(n, class_count, separation, seed).sample(m, seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace fgpac

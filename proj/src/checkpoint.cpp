#include "fgpac/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace fgpac {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'G', 'P', 'A', 'C', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) throw std::runtime_error("checkpoint is truncated");
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view raw(std::size_t n) {
    if (pos_ + n > in_.size()) throw std::runtime_error("checkpoint is truncated");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::vector<double> get_vector(Reader& r, std::uint64_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.get<double>();
  return v;
}

}  // namespace

PosteriorMeasure Checkpoint::posterior() const {
  if (posterior_kind == PosteriorKind::Dirac) return DiracMeasure(params.theta);
  return GaussianMeasure(params.theta, posterior_std);
}

GaussianMeasure Checkpoint::eta() const {
  return interpolate_eta(posterior(), prior, eta_lambda, eta_std);
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  const ModelShape& s = c.params.shape;
  w.put<std::uint32_t>(s.kind == ModelKind::Linear ? 0 : 1);
  w.put<std::uint64_t>(s.input_dim);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(s.class_count));
  w.put<std::uint64_t>(s.hidden_width);
  w.put<std::uint64_t>(s.depth);
  w.put<double>(s.margin_scale);
  w.put<double>(s.leaky_slope);
  w.put<std::uint64_t>(c.params.theta.size());
  for (double v : c.params.theta) w.put<double>(v);
  w.put<std::uint32_t>(c.posterior_kind == PosteriorKind::Dirac ? 0 : 1);
  w.put<double>(c.posterior_std);
  w.put<double>(c.eta_lambda);
  w.put<double>(c.eta_std);
  w.put<double>(c.prior.std());
  w.put<std::uint64_t>(c.prior.dim());
  for (double v : c.prior.mean()) w.put<double>(v);
  w.put<std::uint64_t>(c.prior_epochs);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw std::runtime_error("not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelShape s;
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw std::runtime_error("unknown model kind in checkpoint");
  s.kind = kind == 0 ? ModelKind::Linear : ModelKind::Mlp;
  s.input_dim = r.get<std::uint64_t>();
  s.class_count = static_cast<int>(r.get<std::uint64_t>());
  s.hidden_width = r.get<std::uint64_t>();
  s.depth = r.get<std::uint64_t>();
  s.margin_scale = r.get<double>();
  s.leaky_slope = r.get<double>();
  s.validate();
  const auto d = r.get<std::uint64_t>();
  if (d != s.param_count()) throw std::runtime_error("checkpoint theta length does not match its shape");
  ModelParams params(s, get_vector(r, d));

  const auto post = r.get<std::uint32_t>();
  if (post > 1) throw std::runtime_error("unknown posterior kind in checkpoint");
  const double post_std = r.get<double>();
  const double eta_lambda = r.get<double>();
  const double eta_std = r.get<double>();
  const double prior_std = r.get<double>();
  const auto prior_len = r.get<std::uint64_t>();
  if (prior_len != 0 && prior_len != d) throw std::runtime_error("prior mean length mismatch");
  std::vector<double> prior_mean = prior_len == 0 ? std::vector<double>(d, 0.0) : get_vector(r, prior_len);
  const auto epochs = r.get<std::uint64_t>();
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint");

  return Checkpoint{std::move(params),
                    post == 0 ? PosteriorKind::Dirac : PosteriorKind::Gaussian,
                    post_std,
                    eta_lambda,
                    eta_std,
                    GaussianMeasure(std::move(prior_mean), prior_std),
                    static_cast<std::size_t>(epochs)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fgpac

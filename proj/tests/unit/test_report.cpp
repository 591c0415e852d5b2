#include <stdexcept>
#include <filesystem>
#include <regex>

#include "doctest.h"
#include "fgpac/bounds.hpp"
#include "fgpac/checkpoint.hpp"
#include "fgpac/data.hpp"
#include "fgpac/report.hpp"

using namespace fgpac;
using doctest::Approx;

namespace {

Checkpoint sample_checkpoint(PosteriorKind kind) {
  const ModelShape s = ModelShape::mlp(3, 2, 4, 2, 7.0);
  std::vector<double> theta(s.param_count());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = 0.01 * static_cast<double>(i) - 0.3;
  return Checkpoint{ModelParams(s, theta), kind, kind == PosteriorKind::Gaussian ? 0.02 : 0.0,
                    0.75, 0.004, GaussianMeasure(std::vector<double>(s.param_count(), 0.1), 0.05), 7};
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("checkpoint round trip") {
    for (const PosteriorKind kind : {PosteriorKind::Dirac, PosteriorKind::Gaussian}) {
      const Checkpoint c = sample_checkpoint(kind);
      const Checkpoint d = decode_checkpoint(encode_checkpoint(c));
      CHECK(d.params.shape == c.params.shape);
      CHECK(d.params.theta == c.params.theta);
      CHECK(d.posterior_kind == kind);
      CHECK(d.posterior_std == c.posterior_std);
      CHECK(d.eta_lambda == 0.75);
      CHECK(d.eta_std == 0.004);
      CHECK(d.prior.mean() == c.prior.mean());
      CHECK(d.prior.std() == 0.05);
      CHECK(d.prior_epochs == 7);
      CHECK(is_dirac(d.posterior()) == (kind == PosteriorKind::Dirac));
    }
  }

  TEST_CASE("checkpoint decoding rejects damage") {
    const std::string bytes = encode_checkpoint(sample_checkpoint(PosteriorKind::Gaussian));
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS(decode_checkpoint(bad_magic));
    std::string bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS(decode_checkpoint(bad_version));
    CHECK_THROWS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)));
    CHECK_THROWS(decode_checkpoint(bytes + "x"));
    CHECK_THROWS(decode_checkpoint(""));
  }

  TEST_CASE("checkpoint files") {
    const auto path = std::filesystem::temp_directory_path() / "fgpac_report_test" / "c.ckpt";
    save_checkpoint(path, sample_checkpoint(PosteriorKind::Dirac));
    CHECK(load_checkpoint(path).params.theta == sample_checkpoint(PosteriorKind::Dirac).params.theta);
    std::filesystem::remove_all(path.parent_path());
    CHECK_THROWS(load_checkpoint(path));
  }

  TEST_CASE("bound report JSON round trip") {
    const ModelShape s = ModelShape::linear(3, 2, 4.0);
    const Dataset data = synth_gaussian_blobs(50, 3, 2, 1.0, 5);
    const GaussianMeasure prior(std::vector<double>(s.param_count(), 0.0), 0.3);
    const GaussianMeasure post(std::vector<double>(s.param_count(), 0.1), 0.05);
    const LipschitzEstimate lip = lipschitz_constant(0.1, loss_lipschitz_const(s), 50, 1.0 / 60.0);
    CertifyOptions opt;
    opt.family = BoundFamily::Catoni;
    opt.mc_samples = 100;
    const BoundReport r = certify(s, post, prior, interpolate_eta(post, prior, 0.4), data, lip, opt);
    const nlohmann::json j = to_json(r);
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("family") == "catoni");
    CHECK(j.at("posterior") == "gaussian");
    CHECK(std::regex_match(j.at("created_at").get<std::string>(),
                           std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
    const BoundReport back = report_from_json(j);
    CHECK(back.value == r.value);
    CHECK(back.terms == r.terms);
    CHECK(back.delta_ledger.size() == r.delta_ledger.size());
    CHECK(back.provenance == r.provenance);
    CHECK(to_json(back) == j);
    CHECK(recompute_value(back) == Approx(r.value).epsilon(1e-12));
  }

  TEST_CASE("Lipschitz estimate JSON round trip") {
    LipschitzEstimate e = lipschitz_constant(0.2, 3.0, 100, 0.025);
    e.trace = {{0, 0.1}, {100, 0.2}};
    const LipschitzEstimate back = lipschitz_from_json(to_json(e));
    CHECK(back.value == e.value);
    CHECK(back.surrogate == e.surrogate);
    CHECK(back.trace == e.trace);
  }

  TEST_CASE("JSON files") {
    const auto path = std::filesystem::temp_directory_path() / "fgpac_report_json" / "a" / "r.json";
    write_json(path, nlohmann::json{{"x", 1.5}});
    CHECK(read_json(path).at("x") == 1.5);
    std::filesystem::remove_all(path.parent_path().parent_path());
  }
}

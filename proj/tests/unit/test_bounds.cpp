#include <stdexcept>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fgpac/bounds.hpp"
#include "fgpac/data.hpp"
#include "fgpac/dual.hpp"
#include "fgpac/report.hpp"

using namespace fgpac;
using doctest::Approx;

TEST_SUITE("bounds") {
  TEST_CASE("family names round-trip") {
    for (BoundFamily f : all_families()) CHECK(parse_family(to_string(f)) == f);
    CHECK(parse_posterior_kind("dirac") == PosteriorKind::Dirac);
    CHECK(parse_posterior_kind("gaussian") == PosteriorKind::Gaussian);
    CHECK_THROWS_AS(parse_family("nope"), std::invalid_argument);
  }

  TEST_CASE("only McAllester is free of a transport term") {
    for (BoundFamily f : all_families()) CHECK(family_uses_wasserstein(f) == (f != BoundFamily::McAllester));
  }

  TEST_CASE("gap formulas reject invalid inputs") {
    CHECK_THROWS(mcallester_gap(-1.0, 100, 0.05));
    CHECK_THROWS(mcallester_gap(0.0, 0, 0.05));
    CHECK_THROWS(mcallester_gap(0.0, 100, 0.0));
    CHECK_THROWS(mcallester_gap(0.0, 100, 1.0));
    CHECK_THROWS(kl_wass_gap(1.0, -0.1, 0.0, 100, 0.05));
    CHECK_THROWS(catoni_gap(1.0, 0.0, 0.0, 0.0, 100, 0.05));
    CHECK_THROWS(catoni_fast_rate(0.0, 1.0, 0.0, 0.0, 2.0, 100, 0.05));
    CHECK_THROWS(supermartingale_gap(1.0, 0.0, 0.0, 1.0, 100, 0.05, 1.5));
  }

  TEST_CASE("the transport gap reduces to McAllester at zero transport with 2 delta") {
    CHECK(kl_wass_gap(3.0, 0.0, 2.5, 500, 0.1) == Approx(mcallester_gap(2.5, 500, 0.05)).epsilon(1e-15));
  }

  TEST_CASE("dual derivatives of the gap match finite differences") {
    using D = Dual<2>;
    const D w1 = D::variable(0.3, 0);
    const D kl = D::variable(4.0, 1);
    const D g = expr::kl_wass(2.0 * w1, kl, 200.0, 0.05);
    const double h = 1e-6;
    CHECK(g.v == Approx(kl_wass_gap(2.0, 0.3, 4.0, 200, 0.05)).epsilon(1e-15));
    CHECK(g.d[0] == Approx((kl_wass_gap(2.0, 0.3 + h, 4.0, 200, 0.05) - kl_wass_gap(2.0, 0.3 - h, 4.0, 200, 0.05)) / (2 * h)).epsilon(1e-8));
    CHECK(g.d[1] == Approx((kl_wass_gap(2.0, 0.3, 4.0 + h, 200, 0.05) - kl_wass_gap(2.0, 0.3, 4.0 - h, 200, 0.05)) / (2 * h)).epsilon(1e-8));
  }

  TEST_CASE("Monte-Carlo factor") {
    const MonteCarloFactor a = mc_f_factor(3.0, 4, 20000, 1);
    const MonteCarloFactor b = mc_f_factor(3.0, 4, 20000, 1);
    CHECK(a.value == b.value);
    CHECK(a.std_error > 0.0);
    // sqrt(d) scaling.
    CHECK(mc_f_factor(3.0, 16, 20000, 1).value == Approx(2.0 * a.value).epsilon(1e-12));
    CHECK_THROWS(mc_f_factor(1.0, 1, 20000, 1));
    CHECK_THROWS(mc_f_factor(3.0, 1, 10, 1));
  }

  TEST_CASE("heavy-tail factor and degrees of freedom") {
    CHECK(heavy_tail_factor(2.0, 50) == 0.0);
    CHECK(heavy_tail_factor(1.5, 2) == Approx(2.0 * std::log(2.0) * 0.5 * std::log(2.0)));
    CHECK_THROWS(heavy_tail_factor(1.0, 10));
    CHECK(student_dof_from_alpha(1.5) == Approx(3.0));
  }

  TEST_CASE("prior variance grid") {
    const PriorGrid grid;
    const PriorGridPoint p = prior_grid_point(50, grid, 0.05);
    CHECK(p.sigma_sq == Approx(1.1 * std::exp(-0.5)).epsilon(1e-15));
    CHECK(p.surcharge == Approx(2.0 * std::log(50.0) + std::log(std::numbers::pi * std::numbers::pi / 6.0)));
    // Snapping picks one of the two neighbours.
    const PriorGridPoint s = prior_variance_penalty(1.1 * std::exp(-0.505), grid, 0.05);
    CHECK((s.j == 50 || s.j == 51));
    // Just below c the first point is used; at or above c there is no grid point.
    CHECK(prior_variance_penalty(1.09, grid, 0.05).j == 1);
    CHECK_THROWS(prior_variance_penalty(1.1, grid, 0.05));
    const PriorGridPoint scored = prior_variance_penalty(1.1 * std::exp(-0.505), grid, 0.05,
                                                         [](const PriorGridPoint& q) { return -static_cast<double>(q.j); });
    CHECK(scored.j == 51);
  }

  TEST_CASE("delta ledger") {
    const auto d = compose_delta_budget(0.05, BoundFamily::KlWasserstein, PosteriorKind::Dirac, true, false);
    REQUIRE(d.size() == 2);
    CHECK(ledger_share(d, "bound") == 0.025);
    CHECK(ledger_share(d, "lipschitz") == 0.025);
    CHECK_THROWS(ledger_share(d, "hoeffding"));
    const auto g = compose_delta_budget(0.06, BoundFamily::Hellinger, PosteriorKind::Gaussian, true, true);
    REQUIRE(g.size() == 3);
    CHECK(g[0].share + g[1].share + g[2].share == 0.06);
    CHECK_THROWS(compose_delta_budget(0.05, BoundFamily::McAllester, PosteriorKind::Dirac, false, false));
    CHECK_THROWS(compose_delta_budget(0.05, BoundFamily::KlWasserstein, PosteriorKind::Gaussian, true, false));
    CHECK_THROWS(compose_delta_budget(0.05, BoundFamily::KlWasserstein, PosteriorKind::Dirac, false, false));
  }

  TEST_CASE("Hoeffding correction of the Monte-Carlo risk") {
    const Dataset data = synth_gaussian_blobs(20, 3, 2, 1.0, 1);
    const ModelShape s = ModelShape::linear(3, 2);
    const GaussianMeasure q(std::vector<double>(s.param_count(), 0.0), 0.5);
    const MonteCarloRisk loose = mc_expected_risk(q, s, data, 400, 0.05, 3);
    const MonteCarloRisk strict = mc_expected_risk(q, s, data, 400, 0.05, 3, true);
    CHECK(loose.mean == strict.mean);
    CHECK(loose.correction == Approx(std::sqrt(2.0 * std::log(20.0) / 400.0)));
    CHECK(strict.correction == Approx(std::sqrt(std::log(20.0) / 800.0)));
    CHECK(loose.value == Approx(loose.mean + loose.correction));
    const MonteCarloRisk dirac = mc_expected_risk(DiracMeasure(std::vector<double>(s.param_count(), 0.0)), s, data, 0, 0.05, 3);
    CHECK(dirac.correction == 0.0);
  }

  TEST_CASE("interpolated eta") {
    const GaussianMeasure prior({0.0, 0.0}, 0.4);
    const GaussianMeasure rho({1.0, 2.0}, 0.2);
    const GaussianMeasure e = interpolate_eta(rho, prior, 0.25);
    CHECK(e.mean()[1] == Approx(0.5));
    CHECK(e.std() == Approx(std::sqrt(0.25 * 0.04 + 0.75 * 0.16)));
    const GaussianMeasure ed = interpolate_eta(DiracMeasure({1.0, 2.0}), prior, 1.0, 0.01);
    CHECK(ed.std() == 0.01);
    CHECK(ed.mean()[0] == 1.0);
  }

  TEST_CASE("certificates recompute from their terms") {
    const ModelShape s = ModelShape::linear(3, 2, 4.0);
    const Dataset data = synth_gaussian_blobs(60, 3, 2, 1.0, 5);
    const std::vector<double> w(s.param_count(), 0.2);
    const GaussianMeasure prior(std::vector<double>(s.param_count(), 0.0), 0.3);
    const LipschitzEstimate lip = lipschitz_constant(0.1, loss_lipschitz_const(s), 60, 0.025);
    for (const PosteriorKind kind : {PosteriorKind::Dirac, PosteriorKind::Gaussian}) {
      for (const BoundFamily f : all_families()) {
        if (f == BoundFamily::Student) continue;
        if (f == BoundFamily::McAllester && kind == PosteriorKind::Dirac) continue;
        const PosteriorMeasure post = kind == PosteriorKind::Gaussian ? PosteriorMeasure(GaussianMeasure(w, 0.1))
                                                                      : PosteriorMeasure(DiracMeasure(w));
        std::optional<GaussianMeasure> eta;
        if (family_uses_wasserstein(f)) eta = interpolate_eta(post, prior, 0.5, 0.05);
        CertifyOptions opt;
        opt.family = f;
        opt.mc_samples = 100;
        const BoundReport r = certify(s, post, prior, eta, data, lip, opt);
        CAPTURE(to_string(f));
        CHECK(r.m == 60);
        CHECK(std::isfinite(r.value));
        CHECK(r.value == Approx(recompute_value(r)).epsilon(1e-12));
        CHECK(r.value == Approx(recompute_value(report_from_json(to_json(r)))).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("certify refuses a transport family without eta") {
    const ModelShape s = ModelShape::linear(2, 2);
    const Dataset data = synth_gaussian_blobs(10, 2, 2, 1.0, 5);
    const GaussianMeasure prior(std::vector<double>(s.param_count(), 0.0), 0.3);
    const LipschitzEstimate lip = lipschitz_constant(0.1, 1.0, 10, 0.025);
    CertifyOptions opt;
    CHECK_THROWS(certify(s, DiracMeasure(std::vector<double>(s.param_count(), 0.1)), prior, std::nullopt, data, lip, opt));
  }
}

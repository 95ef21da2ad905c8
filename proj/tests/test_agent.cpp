#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "maea/diagnostics.hpp"
#include "support/test_support.hpp"

using namespace maea;
using maea::test::pt;

namespace {

// objective gradient of (y - f(x))^2 + rho |f - f_prev|^2 at alpha
Vec objective_gradient(const KnowledgeSpace& s, const Vec& alpha, const Vec& prev, const Vec& x,
                       double y, double rho) {
  Vec k = kernel_section_at(s, x);
  return 2.0 * ((k * k.transpose() + rho * s.gram_local) * alpha - k * y -
                rho * (s.gram_local * prev));
}

double objective(const KnowledgeSpace& s, const Vec& alpha, const Vec& prev, const Vec& x,
                 double y, double rho) {
  Vec k = kernel_section_at(s, x);
  double misfit = y - k.dot(alpha);
  Vec d = alpha - prev;
  return misfit * misfit + rho * d.dot(s.gram_local * d);
}

}  // namespace

TEST_CASE("rho schedules") {
  RhoSchedule p = RhoSchedule::power(1.0, 2.0);
  CHECK(p.value(3) == 9.0);
  CHECK(p.diverges());
  RhoSchedule g = RhoSchedule::geometric(2.0, 1.5);
  CHECK(g.value(2) == doctest::Approx(4.5));
  CHECK(g.diverges());
  RhoSchedule e = RhoSchedule::explicit_values({0.5, 0.5, 1.0});
  CHECK(e.value(1) == 0.5);
  CHECK_FALSE(e.diverges());
  CHECK_THROWS(e.value(4));
  CHECK_THROWS(RhoSchedule::explicit_values({1.0, 0.5}));  // decreasing
  CHECK_THROWS(RhoSchedule::power(0.0, 1.0));
}

TEST_CASE("psi embedding") {
  KnowledgeSpace s = test::unit_line_space();
  RkhsFunction z = psi_embed(s, pt(1.3), 0.0);
  CHECK(z.coefficients.cwiseAbs().maxCoeff() == 0.0);

  RkhsFunction psi = psi_embed(s, pt(2.0), 6.0);
  CHECK(psi.coefficients(0) == doctest::Approx(12.0).epsilon(1e-14));
  CHECK(psi.provenance.has_value());

  RkhsFunction two = psi_embed(s, pt(2.0), 12.0);
  CHECK((two.coefficients - 2.0 * psi.coefficients).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("local update closed form") {
  KnowledgeSpace s = test::unit_line_space();

  SUBCASE("hand-solved scalar instance") {
    RkhsFunction prev = RkhsFunction::zero(SpaceTag::agent1, 1);
    RkhsFunction out = local_update(s, prev, pt(2.0), 6.0, 1.0);
    CHECK(out.coefficients(0) == doctest::Approx(2.4).epsilon(1e-12));
    // independent oracle: scalar quadratic minimization over a grid
    double best = 1e300, best_a = 0.0;
    for (double a = 0.0; a <= 5.0; a += 1e-4) {
      double val = objective(s, Vec::Constant(1, a), prev.coefficients, pt(2.0), 6.0, 1.0);
      if (val < best) {
        best = val;
        best_a = a;
      }
    }
    CHECK(std::abs(best_a - out.coefficients(0)) <= 2e-4);
  }

  SUBCASE("huge rho returns the prior") {
    FusionSpace fusion = test::fixture_fusion();
    const KnowledgeSpace& sp = fusion.space1;
    SplitMix64 rng(3);
    RkhsFunction prev = RkhsFunction::zero(SpaceTag::agent1, sp.basis_size());
    prev.coefficients = test::random_range_coeffs(sp.gram_local, rng);
    RkhsFunction out = local_update(sp, prev, pt(1.1), 0.7, 1e12);
    double rel = (out.coefficients - prev.coefficients).norm() /
                 std::max(prev.coefficients.norm(), 1e-300);
    CHECK(rel <= 1e-6);
  }

  SUBCASE("zero data and zero prior stay at zero") {
    RkhsFunction prev = RkhsFunction::zero(SpaceTag::agent1, 1);
    RkhsFunction out = local_update(s, prev, pt(1.5), 0.0, 2.0);
    CHECK(out.coefficients.cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("optimality: gradient vanishes and perturbations lose") {
  FusionSpace fusion = test::fixture_fusion();
  SplitMix64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const KnowledgeSpace& sp = trial % 2 == 0 ? fusion.space1 : fusion.space2;
    RkhsFunction prev = RkhsFunction::zero(sp.tag(), sp.basis_size());
    prev.coefficients = test::random_range_coeffs(sp.gram_local, rng);
    Vec x = pt(rng.uniform(0.0, 2.0));
    double y = rng.normal();
    double rho = std::pow(10.0, rng.uniform(-1.0, 2.0));
    RkhsFunction out = local_update(sp, prev, x, y, rho);
    Vec grad = objective_gradient(sp, out.coefficients, prev.coefficients, x, y, rho);
    CHECK(grad.norm() <= 1e-8);
    double at_min = objective(sp, out.coefficients, prev.coefficients, x, y, rho);
    for (int p = 0; p < 20; ++p) {
      Vec noise(sp.basis_size());
      for (int k = 0; k < noise.size(); ++k) noise(k) = rng.normal();
      double val = objective(sp, Vec(out.coefficients + 0.01 * noise), prev.coefficients, x, y,
                             rho);
      CHECK(val >= at_min - 1e-12);
    }
  }
}

TEST_CASE("the update is jointly linear in (f_prev, y) at fixed x and rho") {
  FusionSpace fusion = test::fixture_fusion();
  const KnowledgeSpace& sp = fusion.space1;
  SplitMix64 rng(37);
  Vec x = pt(0.8);
  double rho = 3.0;
  for (int trial = 0; trial < 50; ++trial) {
    Vec f = test::random_range_coeffs(sp.gram_local, rng);
    Vec g = test::random_range_coeffs(sp.gram_local, rng);
    double y1 = rng.normal(), y2 = rng.normal();
    double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    RkhsFunction fa{sp.tag(), f, std::nullopt}, fb{sp.tag(), g, std::nullopt};
    RkhsFunction combined{sp.tag(), Vec(a * f + b * g), std::nullopt};
    Vec lhs = local_update(sp, combined, x, a * y1 + b * y2, rho).coefficients;
    Vec rhs = a * local_update(sp, fa, x, y1, rho).coefficients +
              b * local_update(sp, fb, x, y2, rho).coefficients;
    CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("apply_Tbar") {
  FusionSpace fusion = test::fixture_fusion();
  const KnowledgeSpace& sp = fusion.space1;
  SplitMix64 rng(41);

  SUBCASE("identical to local_update on random inputs") {
    for (int i = 0; i < 100; ++i) {
      RkhsFunction f{sp.tag(), test::random_range_coeffs(sp.gram_local, rng), std::nullopt};
      Vec x = pt(rng.uniform(0.0, 2.0));
      double y = rng.normal();
      double rho = std::pow(10.0, rng.uniform(-1.0, 3.0));
      RkhsFunction psi = psi_embed(sp, x, y);
      Vec a = apply_Tbar(sp, rho, f, psi).coefficients;
      Vec b = local_update(sp, f, x, y, rho).coefficients;
      CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("null pair maps to null") {
    RkhsFunction f = RkhsFunction::zero(sp.tag(), sp.basis_size());
    RkhsFunction psi = psi_embed(sp, pt(1.0), 0.0);
    CHECK(apply_Tbar(sp, 2.0, f, psi).coefficients.cwiseAbs().maxCoeff() <= 1e-15);
  }

  SUBCASE("psi without provenance raises") {
    RkhsFunction f = RkhsFunction::zero(sp.tag(), sp.basis_size());
    RkhsFunction psi = f;
    CHECK_THROWS(apply_Tbar(sp, 2.0, f, psi));
  }
}

TEST_CASE("operator norm estimation") {
  FusionSpace fusion = test::fixture_fusion();
  const KnowledgeSpace& sp = fusion.space1;
  SamplingConfig cfg;
  cfg.samples = 400;
  cfg.seed = 2024;

  SUBCASE("limit 1 at rho = 1e6") {
    OperatorNormEstimate est = estimate_Tbar_norm(sp, 1e6, cfg);
    CHECK(std::abs(est.value - 1.0) <= 0.05);
  }

  SUBCASE("pure-f slice gives the unit-sphere supremum") {
    SamplingConfig slice = cfg;
    slice.fixed_mix = 1.0;  // y = 0
    OperatorNormEstimate est = estimate_Tbar_norm(sp, 1e6, slice);
    CHECK(std::abs(est.value - 1.0) <= 0.05);
  }

  SUBCASE("deterministic per seed, bit for bit") {
    OperatorNormEstimate a = estimate_Tbar_norm(sp, 100.0, cfg);
    OperatorNormEstimate b = estimate_Tbar_norm(sp, 100.0, cfg);
    CHECK(a.value == b.value);
    CHECK((a.argmax_witness.alpha - b.argmax_witness.alpha).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("the reported value dominates every sampled candidate") {
    OperatorNormEstimate est = estimate_Tbar_norm(sp, 10.0, cfg);
    double witness_phi = agent_phi(sp, 10.0, est.argmax_witness.alpha, est.argmax_witness.x,
                                   est.argmax_witness.y);
    CHECK(est.value * est.value >= witness_phi - 1e-12);
  }
}

TEST_CASE("a kernel that vanishes at every sample point is rejected") {
  // monomial(1) with the single basis point at the origin: the local Gram is
  // [0] and no E point is feasible
  KnowledgeSpace s = build_knowledge_space(1, {FeatureDescriptor::make_monomial(1)},
                                           test::box_1d(0.0, 2.0), {pt(0.0)});
  CHECK(s.gram_local(0, 0) == 0.0);
  SamplingConfig cfg;
  cfg.samples = 50;
  CHECK_THROWS(estimate_Tbar_norm(s, 10.0, cfg));
}

TEST_CASE("norm asymptotics across decades") {
  FusionSpace fusion = test::fixture_fusion();
  SamplingConfig cfg;
  cfg.samples = 300;
  cfg.seed = 5150;
  std::vector<double> values;
  for (double rho : decade_grid(6))
    values.push_back(estimate_Tbar_norm(fusion.space1, rho, cfg).value);
  CHECK(std::abs(values.back() - 1.0) <= 0.05);
  // nonincreasing distance to 1 across the last three decades, up to noise
  for (size_t i = values.size() - 3; i + 1 < values.size(); ++i)
    CHECK(std::abs(values[i + 1] - 1.0) <= std::abs(values[i] - 1.0) + 0.02);
}

TEST_CASE("equicontinuity probe: the Lipschitz estimate does not grow with rho") {
  FusionSpace fusion = test::fixture_fusion();
  EquicontinuityReport rep =
      equicontinuity_probe(fusion.space1, decade_grid(6), 400, 1e-3, 99);
  double early = 0.0;
  for (size_t i = 0; i + 1 < rep.lipschitz.size(); ++i) early = std::max(early, rep.lipschitz[i]);
  CHECK(rep.lipschitz.back() <= 1.5 * early + 1e-9);
}

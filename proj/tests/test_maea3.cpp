#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_support.hpp"

using namespace maea;
using maea::test::pt;

namespace {

struct Rig {
  FusionSpace fusion;
  TransferOperators ops;
  Rig() : fusion(test::fixture_fusion()), ops(build_transfer_operators(fusion)) {}
};

Rig& rig() {
  static Rig r;
  return r;
}

RkhsFunction zero1() { return RkhsFunction::zero(SpaceTag::agent1, rig().fusion.m()); }
RkhsFunction zero2() { return RkhsFunction::zero(SpaceTag::agent2, rig().fusion.m()); }

// decaying data stream matching the acceptance fixture
std::vector<DataPoint> decaying_data(const FusionSpace& fusion, int count, uint64_t seed,
                                     double amp = 2.0, double rate = 0.85) {
  SplitMix64 rng(seed);
  std::vector<DataPoint> out;
  for (int n = 1; n <= count; ++n) {
    double x = rng.uniform(0.0, 2.0);
    double truth = 1.0 + 0.5 * x - 0.25 * x * x;
    out.push_back({pt(x), amp * std::pow(rate, n) * truth});
  }
  (void)fusion;
  return out;
}

AlgorithmConfig fixture_config() {
  AlgorithmConfig cfg;
  cfg.rho1 = RhoSchedule::power(1.0, 2.0);
  cfg.rho2 = RhoSchedule::power(1.0, 2.0);
  cfg.rho_fused = RhoSchedule::power(1.0, 2.0);
  cfg.k_max = 5;
  cfg.epsilon = 1e-4;
  cfg.max_iterations = 500;
  cfg.seed = 4242;
  return cfg;
}

}  // namespace

TEST_CASE("run_iteration propagates the null state") {
  Rig& r = rig();
  IterationState state{zero1(), zero2()};
  DataPoint d1{pt(0.5), 0.0}, d2{pt(1.5), 0.0};
  IterationResult out = run_iteration(r.fusion, r.ops, state, d1, d2, {4.0, 4.0, 4.0});
  CHECK(rkhs_norm(r.fusion.space1, out.f1) <= 1e-14);
  CHECK(rkhs_norm(r.fusion, out.fused) <= 1e-14);
  CHECK(rkhs_norm(r.fusion.space1, out.fbar_1) <= 1e-14);
  CHECK(rkhs_norm(r.fusion.space2, out.fbar_2) <= 1e-14);
}

TEST_CASE("run_iteration is symmetric under an agent swap") {
  // same dictionaries under swapped labels, same data: the fused function and
  // the matched downloads must agree as functions
  auto f1 = {FeatureDescriptor::make_monomial(0), FeatureDescriptor::make_monomial(1)};
  auto f2 = {FeatureDescriptor::make_monomial(2)};
  KnowledgeSpace a1 = build_knowledge_space(1, f1, test::box_1d(0.0, 2.0));
  KnowledgeSpace a2 = build_knowledge_space(2, f2, test::box_1d(0.0, 2.0));
  KnowledgeSpace b1 = build_knowledge_space(1, f2, test::box_1d(0.0, 2.0));
  KnowledgeSpace b2 = build_knowledge_space(2, f1, test::box_1d(0.0, 2.0));
  SelectionConfig sel_a, sel_b;
  sel_a.basis_points_1 = {pt(0.1), pt(0.9), pt(1.7)};
  sel_a.basis_points_2 = {pt(0.5), pt(1.3), pt(1.9)};
  sel_b.basis_points_1 = sel_a.basis_points_2;
  sel_b.basis_points_2 = sel_a.basis_points_1;
  FusionSpace fa = build_fusion_space(a1, a2, sel_a);
  FusionSpace fb = build_fusion_space(b1, b2, sel_b);
  TransferOperators oa = build_transfer_operators(fa);
  TransferOperators ob = build_transfer_operators(fb);

  DataPoint d1{pt(0.6), 0.9}, d2{pt(1.4), -0.3};
  IterationState sa{RkhsFunction::zero(SpaceTag::agent1, fa.m()),
                    RkhsFunction::zero(SpaceTag::agent2, fa.m())};
  IterationResult ra = run_iteration(fa, oa, sa, d1, d2, {2.0, 3.0, 4.0});
  IterationState sb{RkhsFunction::zero(SpaceTag::agent1, fb.m()),
                    RkhsFunction::zero(SpaceTag::agent2, fb.m())};
  IterationResult rb = run_iteration(fb, ob, sb, d2, d1, {3.0, 2.0, 4.0});

  SplitMix64 rng(1);
  for (int i = 0; i < 10; ++i) {
    Vec x = pt(rng.uniform(0.0, 2.0));
    CHECK(evaluate(fa, ra.fused, x) == doctest::Approx(evaluate(fb, rb.fused, x)).epsilon(1e-8));
    CHECK(evaluate(fa.space1, ra.fbar_1, x) ==
          doctest::Approx(evaluate(fb.space2, rb.fbar_2, x)).epsilon(1e-8));
    CHECK(evaluate(fa.space2, ra.fbar_2, x) ==
          doctest::Approx(evaluate(fb.space1, rb.fbar_1, x)).epsilon(1e-8));
  }
}

TEST_CASE("run_iteration agrees with an independently composed chain") {
  Rig& r = rig();
  const FusionSpace& fu = r.fusion;
  const int m = fu.m();
  SplitMix64 rng(17);
  IterationState state{RkhsFunction{SpaceTag::agent1,
                                    test::random_range_coeffs(fu.space1.gram_local, rng),
                                    std::nullopt},
                       RkhsFunction{SpaceTag::agent2,
                                    test::random_range_coeffs(fu.space2.gram_local, rng),
                                    std::nullopt}};
  DataPoint d1{pt(0.7), 1.1}, d2{pt(1.2), -0.4};
  RhoTriple rho{2.0, 5.0, 3.0};
  IterationResult fast = run_iteration(fu, r.ops, state, d1, d2, rho);

  // stage oracles written with plain dense algebra
  auto local_oracle = [&](const KnowledgeSpace& sp, const Vec& prev, const DataPoint& d,
                          double rr) {
    Vec k = kernel_section_at(sp, d.x);
    Mat exact = rr * sp.gram_local + k * k.transpose();
    Vec rhs = k * d.y + rr * (sp.gram_local * prev);
    Eigen::FullPivLU<Mat> lu(exact + rr * sp.jitter * Mat::Identity(m, m));
    Vec a = lu.solve(rhs);
    a += lu.solve(rhs - exact * a);
    return a;
  };
  Vec o1 = local_oracle(fu.space1, state.fbar_1.coefficients, d1, rho.rho1);
  Vec o2 = local_oracle(fu.space2, state.fbar_2.coefficients, d2, rho.rho2);
  // gauge-free comparison: the oracle and the library may pick different
  // null-space representatives of the same function
  CHECK(gram_norm(Vec(o1 - fast.f1.coefficients), fu.space1.gram_local) <= 1e-8);
  CHECK(gram_norm(Vec(o2 - fast.f2.coefficients), fu.space2.gram_local) <= 1e-8);

  Vec up1 = fu.change_basis_1 * o1;
  Vec up2 = fu.change_basis_2 * o2;
  Vec targets(2 * m);
  targets.head(m) = fu.gram_block_1 * up1 + rho.rho1 * up1;
  targets.tail(m) = fu.gram_block_2 * up2 + rho.rho2 * up2;
  CHECK((targets - fast.targets.stacked).norm() <= 1e-8);

  Eigen::SelfAdjointEigenSolver<Mat> es(fu.gram_full);
  Vec beta = Vec::Zero(2 * m);
  for (int k = 0; k < 2 * m; ++k) {
    double lam = es.eigenvalues()(k);
    if (lam <= 1e-12 * es.eigenvalues().maxCoeff()) continue;
    Vec v = es.eigenvectors().col(k);
    beta += v * (v.dot(fu.gram_full * targets) / (lam * lam + rho.rho * lam));
  }
  CHECK(gram_norm(Vec(beta - fast.fused.coefficients), fu.gram_full) <= 1e-8);

  SplitMix64 rng2(18);
  for (int i = 0; i < 10; ++i) {
    Vec x = pt(rng2.uniform(0.0, 2.0));
    double fused_val = fusion_section_at(fu, x).dot(beta);
    CHECK(std::abs(evaluate(fu.space1, fast.fbar_1, x) +
                   evaluate(fu.space2, fast.fbar_2, x) - fused_val) <= 1e-7);
  }
}

TEST_CASE("stopping behavior") {
  Rig& r = rig();

  SUBCASE("constant downloads stop at k_max + 1") {
    AlgorithmConfig cfg = fixture_config();
    cfg.epsilon = 1e-9;
    auto zeros = std::vector<DataPoint>(50, DataPoint{pt(1.0), 0.0});
    IterationTrace trace = run(r.fusion, r.ops, cfg, make_vector_source(zeros, zeros), zero1(),
                               zero2());
    CHECK(trace.stop_reason == StopReason::criterion);
    CHECK(trace.stop_iteration == cfg.k_max + 1);
  }

  SUBCASE("epsilon zero never satisfies the strict inequality") {
    AlgorithmConfig cfg = fixture_config();
    cfg.epsilon = 0.0;
    cfg.max_iterations = 30;
    auto zeros = std::vector<DataPoint>(40, DataPoint{pt(1.0), 0.0});
    IterationTrace trace = run(r.fusion, r.ops, cfg, make_vector_source(zeros, zeros), zero1(),
                               zero2());
    CHECK(trace.stop_reason == StopReason::budget);
    CHECK(trace.iterations() == 30);
  }

  SUBCASE("data exhaustion is reported") {
    AlgorithmConfig cfg = fixture_config();
    cfg.epsilon = 0.0;
    cfg.max_iterations = 30;
    auto short_data = decaying_data(r.fusion, 10, 5);
    IterationTrace trace = run(r.fusion, r.ops, cfg,
                               make_vector_source(short_data, short_data), zero1(), zero2());
    CHECK(trace.stop_reason == StopReason::data_exhausted);
    CHECK(trace.iterations() == 10);
  }

  SUBCASE("decaying fixture stops by criterion with a shrinking window metric") {
    AlgorithmConfig cfg = fixture_config();
    auto d1 = decaying_data(r.fusion, 500, 7);
    auto d2 = decaying_data(r.fusion, 500, 8);
    IterationTrace trace =
        run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());
    CHECK(trace.stop_reason == StopReason::criterion);
    CHECK(trace.stop_iteration <= 500);
    // the window metric trends down: strictly smaller across each
    // 25-iteration gap over the final stretch (per-step wiggles ride on the
    // data randomness, the trend on the rho schedule)
    int n = trace.iterations();
    for (int i = n - 100; i + 25 < n; i += 25)
      CHECK(trace.records[i + 25].stop_metric < trace.records[i].stop_metric);
  }
}

TEST_CASE("the recursion composes: n iterations equal n-1 plus one") {
  Rig& r = rig();
  AlgorithmConfig cfg = fixture_config();
  cfg.epsilon = 0.0;
  cfg.max_iterations = 10;
  auto d1 = decaying_data(r.fusion, 12, 21);
  auto d2 = decaying_data(r.fusion, 12, 22);
  IterationTrace full = run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());

  cfg.max_iterations = 9;
  IterationTrace partial =
      run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());
  IterationState state{RkhsFunction{SpaceTag::agent1, partial.snapshots.at(9).first, std::nullopt},
                       RkhsFunction{SpaceTag::agent2, partial.snapshots.at(9).second,
                                    std::nullopt}};
  RhoTriple rho{cfg.rho1.value(10), cfg.rho2.value(10), cfg.rho_fused.value(10)};
  IterationResult one = run_iteration(r.fusion, r.ops, state, d1[9], d2[9], rho);
  CHECK((one.fbar_1.coefficients - full.snapshots.at(10).first).cwiseAbs().maxCoeff() == 0.0);
  CHECK((one.fbar_2.coefficients - full.snapshots.at(10).second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("determinism: identical configuration gives identical traces") {
  Rig& r = rig();
  AlgorithmConfig cfg = fixture_config();
  cfg.max_iterations = 40;
  cfg.norm_mode = NormMode::per_iteration;
  cfg.norm_samples = 32;
  cfg.bound_check = true;
  auto d1 = decaying_data(r.fusion, 40, 31);
  auto d2 = decaying_data(r.fusion, 40, 32);
  IterationTrace a = run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());
  IterationTrace b = run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());
  REQUIRE(a.iterations() == b.iterations());
  for (int i = 0; i < a.iterations(); ++i) {
    CHECK(a.records[i].norm_down1 == b.records[i].norm_down1);
    CHECK(a.records[i].norm_T == b.records[i].norm_T);
    CHECK(a.records[i].bound_rhs == b.records[i].bound_rhs);
  }
}

TEST_CASE("the loop runs on mixed gaussian and sinusoid dictionaries") {
  FusionSpace fusion = build_fusion_space(
      build_knowledge_space(1,
                            {FeatureDescriptor::make_gaussian(pt(0.5), 0.6),
                             FeatureDescriptor::make_sinusoid(1.5, 0.3)},
                            test::box_1d(0.0, 2.0)),
      build_knowledge_space(2, {FeatureDescriptor::make_monomial(1)}, test::box_1d(0.0, 2.0)),
      {});
  TransferOperators ops = build_transfer_operators(fusion);
  AlgorithmConfig cfg = fixture_config();
  cfg.epsilon = 0.0;
  cfg.max_iterations = 30;
  SplitMix64 rng(77);
  std::vector<DataPoint> d1, d2;
  for (int n = 1; n <= 30; ++n) {
    d1.push_back({pt(rng.uniform(0.0, 2.0)), std::pow(0.9, n)});
    d2.push_back({pt(rng.uniform(0.0, 2.0)), std::pow(0.9, n)});
  }
  IterationTrace trace = run(fusion, ops, cfg, make_vector_source(d1, d2),
                             RkhsFunction::zero(SpaceTag::agent1, fusion.m()),
                             RkhsFunction::zero(SpaceTag::agent2, fusion.m()));
  REQUIRE(trace.iterations() == 30);
  for (const auto& rec : trace.records) {
    CHECK(std::isfinite(rec.norm_down1));
    CHECK(std::isfinite(rec.norm_down2));
    CHECK(rec.norm_down1 + rec.norm_down2 <= 100.0);  // no blowup
  }
}

TEST_CASE("valid-sequence classification") {
  Rig& r = rig();

  SUBCASE("geometric targets are valid with the series-oracle constant") {
    const int horizon = 20;
    std::vector<DataPoint> d1, d2;
    for (int n = 1; n <= horizon; ++n) {
      d1.push_back({pt(0.7), std::pow(2.0, -n)});
      d2.push_back({pt(1.3), std::pow(2.0, -n)});
    }
    ValiditySequenceReport rep =
        validate_sequence(r.fusion, zero1(), zero2(), d1, d2, horizon);
    CHECK(rep.verdict == ValidityVerdict::valid_bounded);
    // oracle: psi norms scale as 4^-n, so the ratio is exactly 1/4 and the
    // tail bound is t_last * (1/4) / (3/4)
    CHECK(rep.tail_ratio == doctest::Approx(0.25).epsilon(1e-9));
    auto psi_sq = [&](const KnowledgeSpace& sp, const DataPoint& d) {
      Vec k = kernel_section_at(sp, d.x);
      return d.y * d.y * quad_form(k, sp.gram_local);
    };
    double denom = psi_sq(r.fusion.space1, d1[0]) + psi_sq(r.fusion.space2, d2[0]);
    double sum = 0.0, t_last = 0.0;
    for (int n = 2; n <= horizon; ++n) {
      t_last = (psi_sq(r.fusion.space1, d1[n - 1]) + psi_sq(r.fusion.space2, d2[n - 1])) / denom;
      sum += t_last;
    }
    double oracle = sum + t_last * 0.25 / 0.75;
    CHECK(rep.c_estimate == doctest::Approx(oracle).epsilon(1e-9));
    // partial sums never decrease
    for (size_t i = 0; i + 1 < rep.partial_sums.size(); ++i)
      CHECK(rep.partial_sums[i] <= rep.partial_sums[i + 1]);
  }

  SUBCASE("constant targets diverge") {
    std::vector<DataPoint> d(40, DataPoint{pt(0.7), 1.0});
    ValiditySequenceReport rep = validate_sequence(r.fusion, zero1(), zero2(), d, d, 40);
    CHECK(rep.verdict == ValidityVerdict::diverging);
  }

  SUBCASE("all-zero tail is valid with a zero constant") {
    std::vector<DataPoint> d1{DataPoint{pt(0.7), 1.0}};
    std::vector<DataPoint> d2{DataPoint{pt(1.3), 1.0}};
    for (int n = 2; n <= 20; ++n) {
      d1.push_back({pt(0.7), 0.0});
      d2.push_back({pt(1.3), 0.0});
    }
    ValiditySequenceReport rep = validate_sequence(r.fusion, zero1(), zero2(), d1, d2, 20);
    CHECK(rep.verdict == ValidityVerdict::valid_bounded);
    CHECK(rep.c_estimate == 0.0);
  }

  SUBCASE("vanishing denominator raises") {
    std::vector<DataPoint> d(20, DataPoint{pt(0.7), 0.0});
    CHECK_THROWS(validate_sequence(r.fusion, zero1(), zero2(), d, d, 20));
  }

  SUBCASE("horizon guard") {
    std::vector<DataPoint> d(20, DataPoint{pt(0.7), 1.0});
    CHECK_THROWS(validate_sequence(r.fusion, zero1(), zero2(), d, d, 5));
  }
}

TEST_CASE("bounded-subsequence selection") {
  SUBCASE("all ones selects everything with unit constants") {
    std::vector<double> norms(32, 1.0);
    SubsequenceSelection sel = select_bounded_subsequence(norms);
    CHECK_FALSE(sel.pathological);
    CHECK(sel.indices.size() == norms.size());
    CHECK(sel.c5 == 1.0);
    CHECK(sel.c_M1 == 1.0);
    CHECK(sel.c_M2 == 1.0);
  }

  SUBCASE("1 + 1/n pattern walks the envelope") {
    std::vector<double> norms;
    for (int n = 1; n <= 48; ++n) norms.push_back(1.0 + 1.0 / n);
    for (int n = 49; n <= 64; ++n) norms.push_back(1.0);
    SubsequenceSelection sel = select_bounded_subsequence(norms);
    CHECK(sel.c5 == 1.0);
    REQUIRE(sel.indices.size() >= 5);
    CHECK(sel.indices[0] == 1);   // a_2 = 1.5, envelope 1/2
    CHECK(sel.indices[1] == 3);   // a_4 = 1.25, envelope 1/4
    CHECK(sel.indices[2] == 7);
    CHECK(sel.indices[3] == 15);
    CHECK(sel.indices[4] == 31);
    double cap = 1.0;
    for (int l = 1; l <= 40; ++l) cap *= 1.0 + std::pow(0.5, l);
    CHECK(sel.c_M1 <= cap);
    // every selected value obeys its envelope level
    for (size_t l = 0; l < sel.indices.size(); ++l)
      CHECK(std::abs(norms[sel.indices[l]] / sel.c5 - 1.0) <= std::pow(0.5, l + 1) + 1e-15);
  }

  SUBCASE("all-zero norms are the pathological case") {
    std::vector<double> norms(16, 0.0);
    SubsequenceSelection sel = select_bounded_subsequence(norms);
    CHECK(sel.pathological);
  }
}

TEST_CASE("bound check") {
  Rig& r = rig();

  SUBCASE("single iteration reduces to the first factor") {
    AlgorithmConfig cfg = fixture_config();
    cfg.max_iterations = 1;
    cfg.epsilon = 0.0;
    cfg.norm_mode = NormMode::per_iteration;
    cfg.norm_samples = 48;
    cfg.bound_check = true;
    auto d = decaying_data(r.fusion, 2, 51);
    SymEig e1 = sym_eig_clamped(r.fusion.space1.gram_local);
    RkhsFunction f0_1{SpaceTag::agent1,
                      e1.pinv_apply(kernel_section_at(r.fusion.space1, pt(0.5))), std::nullopt};
    f0_1.coefficients /= gram_norm(f0_1.coefficients, r.fusion.space1.gram_local);
    SymEig e2 = sym_eig_clamped(r.fusion.space2.gram_local);
    RkhsFunction f0_2{SpaceTag::agent2,
                      e2.pinv_apply(kernel_section_at(r.fusion.space2, pt(1.5))), std::nullopt};
    f0_2.coefficients /= gram_norm(f0_2.coefficients, r.fusion.space2.gram_local);
    IterationTrace trace = run(r.fusion, r.ops, cfg, make_vector_source(d, d), f0_1, f0_2);
    REQUIRE(trace.iterations() == 1);
    const auto& rec = trace.records[0];
    double bracket = quad_form(f0_1.coefficients, r.fusion.space1.gram_local) +
                     quad_form(f0_2.coefficients, r.fusion.space2.gram_local) +
                     rec.psi1 * rec.psi1 + rec.psi2 * rec.psi2;
    CHECK(rec.bound_rhs == doctest::Approx(rec.norm_T * bracket).epsilon(1e-14));
    BoundCheckResult bc = bound_check(r.fusion, trace);
    CHECK(bc.violations == 0);
  }

  SUBCASE("null run keeps both sides at zero") {
    AlgorithmConfig cfg = fixture_config();
    cfg.max_iterations = 5;
    cfg.epsilon = 0.0;
    cfg.norm_mode = NormMode::per_iteration;
    cfg.norm_samples = 32;
    cfg.bound_check = true;
    auto zeros = std::vector<DataPoint>(6, DataPoint{pt(1.0), 0.0});
    IterationTrace trace =
        run(r.fusion, r.ops, cfg, make_vector_source(zeros, zeros), zero1(), zero2());
    BoundCheckResult bc = bound_check(r.fusion, trace);
    for (size_t i = 0; i < bc.rhs.size(); ++i) {
      CHECK(bc.rhs[i] == 0.0);
      CHECK(bc.ok[i]);
    }
  }

  SUBCASE("missing estimates raise") {
    AlgorithmConfig cfg = fixture_config();
    cfg.max_iterations = 3;
    cfg.epsilon = 0.0;
    auto d = decaying_data(r.fusion, 4, 52);
    IterationTrace trace = run(r.fusion, r.ops, cfg, make_vector_source(d, d), zero1(), zero2());
    CHECK_THROWS(bound_check(r.fusion, trace));
  }

  SUBCASE("200-iteration fixture passes at 5% slack") {
    AlgorithmConfig cfg = fixture_config();
    cfg.max_iterations = 200;
    cfg.epsilon = 0.0;
    cfg.norm_mode = NormMode::per_iteration;
    cfg.norm_samples = 64;
    cfg.bound_check = true;
    auto d1 = decaying_data(r.fusion, 200, 53);
    auto d2 = decaying_data(r.fusion, 200, 54);
    // unit-norm initial estimates keep the bound's initial bracket at O(1)
    SymEig e1 = sym_eig_clamped(r.fusion.space1.gram_local);
    SymEig e2 = sym_eig_clamped(r.fusion.space2.gram_local);
    RkhsFunction f0_1{SpaceTag::agent1,
                      e1.pinv_apply(kernel_section_at(r.fusion.space1, pt(0.5))), std::nullopt};
    f0_1.coefficients /= gram_norm(f0_1.coefficients, r.fusion.space1.gram_local);
    RkhsFunction f0_2{SpaceTag::agent2,
                      e2.pinv_apply(kernel_section_at(r.fusion.space2, pt(1.5))), std::nullopt};
    f0_2.coefficients /= gram_norm(f0_2.coefficients, r.fusion.space2.gram_local);
    IterationTrace trace = run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), f0_1, f0_2);
    BoundCheckResult bc = bound_check(r.fusion, trace, 0.05);
    CHECK(bc.violations == 0);
    CHECK(bc.uniform_constant > 0.0);
    // trace invariant: bound_rhs dominates the realized download norm
    for (const auto& rec : trace.records) {
      double lhs = std::sqrt(rec.norm_down1 * rec.norm_down1 + rec.norm_down2 * rec.norm_down2);
      CHECK(lhs <= rec.bound_rhs * 1.05);
    }
  }
}

TEST_CASE("consistency probe") {
  Rig& r = rig();

  SUBCASE("constant trace is cauchy at any epsilon") {
    IterationTrace trace;
    trace.f0_1 = Vec::Zero(3);
    trace.f0_2 = Vec::Zero(3);
    Vec a = Vec::Constant(3, 0.3), b = Vec::Constant(3, -0.2);
    for (int n = 1; n <= 40; ++n) {
      IterationRecord rec;
      rec.n = n;
      trace.records.push_back(rec);
      trace.snapshots.emplace(n, std::make_pair(a, b));
    }
    ConsistencyProbeResult res = consistency_probe(r.fusion, trace, 10, 1e-15);
    CHECK(res.verdict == ProbeVerdict::cauchy);
    CHECK(res.diameter == 0.0);
  }

  SUBCASE("alternating trace with an even-stride subsequence") {
    IterationTrace trace;
    trace.f0_1 = Vec::Zero(3);
    trace.f0_2 = Vec::Zero(3);
    Vec a = Vec::Constant(3, 0.4), b = Vec::Constant(3, -0.6);
    for (int n = 1; n <= 40; ++n) {
      const Vec& v = n % 2 == 0 ? a : b;
      IterationRecord rec;
      rec.n = n;
      trace.records.push_back(rec);
      trace.snapshots.emplace(n, std::make_pair(v, v));
    }
    // no norm estimates: uniform stride 40 / (2*10) = 2 picks one parity
    ConsistencyProbeResult res = consistency_probe(r.fusion, trace, 10, 1e-12);
    CHECK(res.verdict == ProbeVerdict::cauchy);
  }

  SUBCASE("window longer than the subsequence raises") {
    IterationTrace trace;
    trace.snapshots.emplace(1, std::make_pair(Vec::Zero(3), Vec::Zero(3)));
    CHECK_THROWS(consistency_probe(r.fusion, trace, 10, 1e-3));
  }

  SUBCASE("decaying fixture run is cauchy at 1e-3") {
    AlgorithmConfig cfg = fixture_config();
    cfg.epsilon = 0.0;  // run the full horizon so the probe sees the tail
    cfg.max_iterations = 300;
    auto d1 = decaying_data(r.fusion, 300, 61);
    auto d2 = decaying_data(r.fusion, 300, 62);
    IterationTrace trace =
        run(r.fusion, r.ops, cfg, make_vector_source(d1, d2), zero1(), zero2());
    ConsistencyProbeResult res = consistency_probe(r.fusion, trace, 20, 1e-3);
    CHECK(res.verdict == ProbeVerdict::cauchy);
  }
}

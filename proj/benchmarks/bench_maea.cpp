#include <benchmark/benchmark.h>

#include "maea/maea3.hpp"
#include "maea/rng.hpp"

using namespace maea;

namespace {

Vec pt(double x) {
  Vec v(1);
  v << x;
  return v;
}

struct Rig {
  FusionSpace fusion;
  TransferOperators ops;
  Rig()
      : fusion(build_fusion_space(
            build_knowledge_space(1,
                                  {FeatureDescriptor::make_monomial(0),
                                   FeatureDescriptor::make_monomial(1)},
                                  DomainBox(Vec::Zero(1), 2.0 * Vec::Ones(1))),
            build_knowledge_space(2, {FeatureDescriptor::make_monomial(2)},
                                  DomainBox(Vec::Zero(1), 2.0 * Vec::Ones(1))),
            {})),
        ops(build_transfer_operators(fusion)) {}
};

Rig& rig() {
  static Rig r;
  return r;
}

}  // namespace

static void BM_LocalUpdate(benchmark::State& state) {
  Rig& r = rig();
  RkhsFunction prev = RkhsFunction::zero(SpaceTag::agent1, r.fusion.m());
  for (auto _ : state) {
    RkhsFunction out = local_update(r.fusion.space1, prev, pt(0.7), 1.1, 4.0);
    benchmark::DoNotOptimize(out.coefficients.data());
  }
}
BENCHMARK(BM_LocalUpdate);

static void BM_FuseStep(benchmark::State& state) {
  Rig& r = rig();
  VirtualTargets t;
  t.y_hat_1 = Vec::Constant(r.fusion.m(), 0.4);
  t.y_hat_2 = Vec::Constant(r.fusion.m(), -0.2);
  t.stacked.resize(2 * r.fusion.m());
  t.stacked << t.y_hat_1, t.y_hat_2;
  for (auto _ : state) {
    RkhsFunction f = fuse(r.fusion, t, 9.0);
    benchmark::DoNotOptimize(f.coefficients.data());
  }
}
BENCHMARK(BM_FuseStep);

static void BM_FullIteration(benchmark::State& state) {
  Rig& r = rig();
  IterationState s{RkhsFunction::zero(SpaceTag::agent1, r.fusion.m()),
                   RkhsFunction::zero(SpaceTag::agent2, r.fusion.m())};
  DataPoint d1{pt(0.7), 1.0}, d2{pt(1.3), -0.5};
  for (auto _ : state) {
    IterationResult out = run_iteration(r.fusion, r.ops, s, d1, d2, {4.0, 4.0, 4.0});
    benchmark::DoNotOptimize(out.fbar_1.coefficients.data());
  }
}
BENCHMARK(BM_FullIteration);

static void BM_TbarNormEstimate(benchmark::State& state) {
  Rig& r = rig();
  SamplingConfig cfg;
  cfg.samples = static_cast<int>(state.range(0));
  cfg.seed = 5;
  for (auto _ : state) {
    OperatorNormEstimate est = estimate_Tbar_norm(r.fusion.space1, 100.0, cfg);
    benchmark::DoNotOptimize(est.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TbarNormEstimate)->Arg(64)->Arg(256)->Complexity();

BENCHMARK_MAIN();

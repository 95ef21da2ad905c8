#pragma once

#include <functional>
#include <limits>
#include <map>

#include "maea/fusion.hpp"
#include "maea/transfer.hpp"

namespace maea {

enum class NormMode { off, per_stage, per_iteration };

struct AlgorithmConfig {
  RhoSchedule rho1 = RhoSchedule::power(1.0, 2.0);
  RhoSchedule rho2 = RhoSchedule::power(1.0, 2.0);
  RhoSchedule rho_fused = RhoSchedule::power(1.0, 2.0);
  int k_max = 5;
  double epsilon = 1e-4;
  int max_iterations = 500;
  uint64_t seed = 0;
  bool bound_check = false;
  NormMode norm_mode = NormMode::off;
  int norm_samples = 96;
  int norm_refine_iters = 6;
  int snapshot_stride = 1;  // 0 disables coefficient snapshots
};

// Yields one data point per agent per iteration; empty means exhausted.
using DataSource = std::function<std::optional<DataPoint>(int agent_id, int iteration)>;

DataSource make_vector_source(std::vector<DataPoint> agent1, std::vector<DataPoint> agent2);

enum class StopReason { criterion, budget, data_exhausted };

struct IterationRecord {
  int n = 0;
  double rho1 = 0.0, rho2 = 0.0, rho = 0.0;
  double norm_f1 = 0.0, norm_f2 = 0.0, norm_fused = 0.0;
  double norm_down1 = 0.0, norm_down2 = 0.0;
  double psi1 = 0.0, psi2 = 0.0;      // psi norms of the incoming data
  double bound_rhs = std::numeric_limits<double>::quiet_NaN();
  double stop_metric = std::numeric_limits<double>::quiet_NaN();
  double norm_T = std::numeric_limits<double>::quiet_NaN();       // composite estimate
  double norm_Tbar = std::numeric_limits<double>::quiet_NaN();    // per-stage estimates
  double norm_Tfuse = std::numeric_limits<double>::quiet_NaN();
  double norm_That = std::numeric_limits<double>::quiet_NaN();
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  std::map<int, std::pair<Vec, Vec>> snapshots;  // n -> downloaded coefficient pair
  Vec f0_1, f0_2;
  Vec final_fbar_1, final_fbar_2;  // downloads of the last executed iteration
  StopReason stop_reason = StopReason::budget;
  int stop_iteration = 0;

  int iterations() const { return static_cast<int>(records.size()); }
};

struct IterationState {
  RkhsFunction fbar_1;
  RkhsFunction fbar_2;
};

struct IterationResult {
  RkhsFunction f1, f2;          // local estimates
  RkhsFunction uploaded_1, uploaded_2;
  VirtualTargets targets;
  RkhsFunction fused;
  RkhsFunction fbar_1, fbar_2;  // downloads
};

struct RhoTriple {
  double rho1 = 1.0, rho2 = 1.0, rho = 1.0;
};

// One pass of local update x2, upload x2, target reconstruction x2, fusion
// and download, returning every intermediate for the trace.
IterationResult run_iteration(const FusionSpace& fusion, const TransferOperators& ops,
                              const IterationState& state, const DataPoint& d1,
                              const DataPoint& d2, const RhoTriple& rho);

// Sampled composite operator norm over the unit Ebar set; `realized` (the
// actual input of the iteration) joins the candidate pool when given.
struct RealizedInput {
  Vec f1, f2;
  DataPoint d1, d2;
};
double estimate_iteration_norm(const FusionSpace& fusion, const TransferOperators& ops,
                               const RhoTriple& rho, const SamplingConfig& cfg,
                               const RealizedInput* realized = nullptr);

IterationTrace run(const FusionSpace& fusion, const TransferOperators& ops,
                   const AlgorithmConfig& cfg, const DataSource& source,
                   const RkhsFunction& f0_1, const RkhsFunction& f0_2);

enum class ValidityVerdict { valid_bounded, inconclusive, diverging };

struct ValiditySequenceReport {
  std::vector<double> partial_sums;
  double tail_ratio = 0.0;
  ValidityVerdict verdict = ValidityVerdict::inconclusive;
  double c_estimate = std::numeric_limits<double>::quiet_NaN();
};

ValiditySequenceReport validate_sequence(const FusionSpace& fusion, const RkhsFunction& f0_1,
                                         const RkhsFunction& f0_2,
                                         const std::vector<DataPoint>& data1,
                                         const std::vector<DataPoint>& data2, int horizon);

struct SubsequenceSelection {
  std::vector<int> indices;  // 0-based into the input list
  double c5 = 0.0;
  double c_M1 = 0.0;  // max prefix product of normalized norms
  double c_M2 = 0.0;  // max window product along the subsequence
  bool pathological = false;
};

// Greedy envelope selection: the l-th chosen index satisfies
// |a_n / c5 - 1| <= 2^-l, with c5 the median of the last quartile.
SubsequenceSelection select_bounded_subsequence(const std::vector<double>& norms);

struct BoundCheckResult {
  std::vector<double> rhs;       // trajectory-bound right-hand side per iteration
  std::vector<bool> ok;          // lhs <= rhs * (1 + tolerance)
  double uniform_constant = 0.0; // horizon-independent bound
  int violations = 0;
};

BoundCheckResult bound_check(const FusionSpace& fusion, const IterationTrace& trace,
                             double tolerance = 0.05);

enum class ProbeVerdict { cauchy, not_yet };

struct ConsistencyProbeResult {
  ProbeVerdict verdict = ProbeVerdict::not_yet;
  double diameter = 0.0;
  std::vector<int> subsequence;  // iteration numbers probed
};

ConsistencyProbeResult consistency_probe(const FusionSpace& fusion, const IterationTrace& trace,
                                         int window, double epsilon);

}  // namespace maea

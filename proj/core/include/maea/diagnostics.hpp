#pragma once

#include "maea/maea3.hpp"

namespace maea {

enum class SweepTarget { agent1, agent2, multiagent, fusion };

struct SweepResult {
  SweepTarget target = SweepTarget::agent1;
  std::vector<double> rho_values;          // strictly increasing
  std::vector<OperatorNormEstimate> norm_estimates;
  double target_value = 1.0;               // 1 for the agent/multiagent cases, <= 1 for fusion
  double limit_gap = 0.0;                  // |last estimate - target_value|
  std::vector<int> chain_violations;       // multiagent only: per grid point
};

// Multi-agent estimation-and-upload operator norm over the unit Ebar set.
// When chain_violations is given, every sample is also checked against the
// first-power submultiplicativity chain using the supplied per-agent norms.
OperatorNormEstimate estimate_multiagent_norm(const FusionSpace& fusion, double rho1, double rho2,
                                              const SamplingConfig& cfg,
                                              double tbar_norm_1 = -1.0, double tbar_norm_2 = -1.0,
                                              int* chain_violations = nullptr);

SweepResult norm_sweep(const FusionSpace& fusion, SweepTarget target,
                       const std::vector<double>& rho_grid, const SamplingConfig& cfg);

std::vector<double> decade_grid(int decades);  // 1e0 .. 1e{decades}

void write_sweep_csv(const std::string& path, const SweepResult& sweep);
void write_sweep_plot_data(const std::string& path, const SweepResult& sweep);

struct PerturbationReport {
  int trials = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max of lhs / rhs over trials
};

// Matrix-inverse perturbation inequality:
// |N^-1 - M^-1| <= 2 |M^-1|^2 |M - N| for |M - N| < 1/(2 |M^-1|).
PerturbationReport inverse_perturbation_test(int trials, int dimension, uint64_t seed);

enum class ConvergenceKind { phi1, phi2phi1, agent_phi };

struct ConvergenceReport {
  ConvergenceKind kind = ConvergenceKind::phi1;
  std::vector<double> rho_values;
  std::vector<double> sup_deviation;   // per rho
  int pointwise_violations = 0;        // phi1 only: monotonicity failures across the grid
  double final_deviation = 0.0;
};

// Deviation of the displayed maps from their stated limits over E samples.
// phi1 compares in the Euclidean coefficient norm (the displayed inequality
// is exact there); phi2phi1 in the H seminorm, which quotients the structural
// null space of the doubled section basis.
ConvergenceReport uniform_convergence_test(const FusionSpace& fusion, ConvergenceKind kind,
                                           const std::vector<double>& rho_grid, int sample_count,
                                           uint64_t seed, double condition_cap = 1e8);

struct EquicontinuityReport {
  std::vector<double> rho_values;
  std::vector<double> lipschitz;  // empirical L per rho
};

// Samples nearby pairs on E^i and reports max |phi difference| / distance.
EquicontinuityReport equicontinuity_probe(const KnowledgeSpace& space,
                                          const std::vector<double>& rho_grid, int pairs,
                                          double delta, uint64_t seed);

}  // namespace maea

#pragma once

#include "maea/space.hpp"

namespace maea {

enum class RhoKind { power, geometric, explicit_list };

// The regularizer sequence rho_n, n >= 1.  Strictly positive, monotone
// nondecreasing; power(p>0) and geometric(r>1) diverge.
struct RhoSchedule {
  RhoKind kind = RhoKind::power;
  double rho0 = 1.0;
  double param = 1.0;       // exponent p or ratio r
  std::vector<double> values;  // explicit kind

  static RhoSchedule power(double rho0, double p);
  static RhoSchedule geometric(double rho0, double r);
  static RhoSchedule explicit_values(std::vector<double> values);

  double value(int n) const;  // n >= 1
  bool diverges() const;
};

struct SamplingConfig {
  int samples = 400;
  int refinement_iters = 12;
  int refine_top = 4;
  uint64_t seed = 0;
  double fixed_mix = -1.0;  // in [0,1]: forces the f-vs-psi mass split (1 = pure f, y = 0)
};

struct NormWitness {
  Vec alpha;
  Vec x;
  double y = 0.0;
};

struct OperatorNormEstimate {
  double value = 0.0;  // operator norm (not squared); max over evaluated candidates
  int samples = 0;
  int refinement_iters = 0;
  NormWitness argmax_witness;
  uint64_t seed = 0;
};

// psi_{(x,y)} = (Kbar(x) y)^T Kbar(.): coefficients y * K^i(x, xbar_j),
// tagged with the generating data point.
RkhsFunction psi_embed(const KnowledgeSpace& space, const Vec& x, double y);

// Closed-form minimizer of (y - f(x))^2 + rho * |f - f_prev|^2 over the basis
// span.  The jittered system is solved and refined once against the exact
// (consistent) normal equations.
RkhsFunction local_update(const KnowledgeSpace& space, const RkhsFunction& f_prev, const Vec& x,
                          double y, double rho);

// The estimation operator applied to an (f, psi) pair; psi must carry its
// generating data point.
RkhsFunction apply_Tbar(const KnowledgeSpace& space, double rho, const RkhsFunction& f,
                        const RkhsFunction& psi);

// Sampled supremum of phi over the unit set E^i, refined by coordinate ascent.
OperatorNormEstimate estimate_Tbar_norm(const KnowledgeSpace& space, double rho,
                                        const SamplingConfig& cfg);

// phi value at one E^i point (exposed for the diagnostics probes).
double agent_phi(const KnowledgeSpace& space, double rho, const Vec& alpha, const Vec& x,
                 double y);

}  // namespace maea

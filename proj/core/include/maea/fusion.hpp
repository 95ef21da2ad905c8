#pragma once

#include "maea/agent.hpp"
#include "maea/fusion_space.hpp"

namespace maea {

// Virtual targets at the basis points whose ridge regression reproduces the
// uploaded models.
struct VirtualTargets {
  Vec y_hat_1;
  Vec y_hat_2;
  Vec stacked;     // [y_hat_1; y_hat_2]
  double rho_used_1 = 0.0;
  double rho_used_2 = 0.0;
};

struct SpectralReport {
  double lambda_max_K = 0.0;
  double lambda_max_Kt1 = 0.0;
  double lambda_max_Kt2 = 0.0;
  double lambda_max_D = 0.0;     // Schur-reduced block-diagonal factor
  double schur_residual = 0.0;   // relative reconstruction error of P^T D P
  bool block_bound_holds = false;     // lambda_max_K <= max block + 1e-8
  bool schur_block_bound_holds = false;  // lambda_max_D <= max block + 1e-8 (always true)
  bool normalization_applied = false;
  double kernel_scale = 1.0;
  double suggested_scale = 1.0;  // extra factor that would bring max block to 1
};

// (gram + rho I) alpha: the targets whose ridge fit with the same Gram and
// rho returns alpha.
Vec reconstruct_targets(const Mat& gram, const Vec& alpha, double rho);

// Kernel ridge regression at the Gram's points: (gram + rho I)^{-1} y.
Vec ridge_fit(const Mat& gram, const Vec& y, double rho);

// Both agents' targets from the uploaded (block-coordinate) functions.
VirtualTargets reconstruct_all(const FusionSpace& fusion, const RkhsFunction& uploaded_1,
                               const RkhsFunction& uploaded_2, double rho_1, double rho_2);

// Fused regression: minimizes the squared target misfits at the basis points plus
// rho |f|_H^2 over the 2m-section span; clamped solve, min-norm coefficients.
RkhsFunction fuse(const FusionSpace& fusion, const VirtualTargets& targets, double rho);

// The fused coefficient map at one E point (single rho as in the
// fusion-center operator); exposed for diagnostics.
Vec fusion_coefficient_map(const FusionSpace& fusion, const SymEig& gram_eig, const Vec& block_1,
                           const Vec& block_2, double rho);

double fusion_phi(const FusionSpace& fusion, const SymEig& gram_eig, const Vec& block_1,
                  const Vec& block_2, double rho);

struct FusionNormConfig {
  SamplingConfig sampling;
  int slice_agent = 0;  // 1 or 2 restricts the other agent's block to zero
};

OperatorNormEstimate estimate_T_norm(const FusionSpace& fusion, double rho,
                                     const FusionNormConfig& cfg);

// Samples of the E set: pairs of block-coordinate vectors with unit combined
// H mass; zero directions of the block quadratic forms are excluded.
std::vector<std::pair<Vec, Vec>> sample_E(const FusionSpace& fusion, int count, uint64_t seed,
                                          int slice_agent = 0);

SpectralReport spectral_check(const FusionSpace& fusion);

std::string spectral_report_text(const SpectralReport& r);

}  // namespace maea

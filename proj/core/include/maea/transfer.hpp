#pragma once

#include <string>
#include <utility>

#include "maea/fusion_space.hpp"

namespace maea {

// Matrix realizations of the transfer machinery in fusion coordinates.
// Every H-inner-product eigenproblem is reduced to an ordinary symmetric one
// through the congruence gram_full = R^T R restricted to the retained
// spectrum; the same null-space determination (rank_tol, relative) is shared
// by the square roots and the projections.
struct TransferOperators {
  Mat lbar_1, lbar_2;            // 2m x 2m realizations of Lbar^i
  Mat sqrt_lbar_1, sqrt_lbar_2;  // square roots under the H inner product
  Mat proj_1, proj_2;            // projections onto the retained span
  double c_d = 1.0;              // projection-sum supremum
  double c_d_inner = 1.0;        // inner-product variant, diagnostic only
  double rank_tol = 1e-10;

  // workspace shared by download/norm estimation
  SymEig gram_eig;               // clamped spectrum of gram_full
  Mat kernel_gram_1, kernel_gram_2;  // B^i = K^i at all 2m point pairs
  Mat s_1, s_2;                  // congruence images of Lbar^i (retained coords)
  Mat s_sqrt_1, s_sqrt_2, s_proj_1, s_proj_2;
  Mat section_eval_1, section_eval_2;  // K^i(z_r, xbar^i_j), 2m x m

  Vec to_retained(const Vec& coeffs) const {
    return gram_eig.lambda_r.cwiseSqrt().asDiagonal() *
           (gram_eig.vectors_r.transpose() * coeffs);
  }
  Vec from_retained(const Vec& c) const {
    return gram_eig.vectors_r * gram_eig.lambda_r.cwiseSqrt().cwiseInverse().asDiagonal() * c;
  }
};

TransferOperators build_transfer_operators(const FusionSpace& fusion, double rank_tol = 1e-10);

// Coefficient-space realization of Lbar^i alone: solves gram_full * out =
// (K^i at all point pairs) * in on the retained spectrum.
Mat build_lbar(const FusionSpace& fusion, int agent_id, double rank_tol = 1e-10);

// Generalized square root and null-space projection of an H-self-adjoint
// positive operator given as a coefficient-space matrix.  Throws when a
// generalized eigenvalue falls below -1e-8.
std::pair<Mat, Mat> sqrt_and_projection(const Mat& lbar, const Mat& gram_full,
                                        double rank_tol = 1e-10);

// sqrt of the largest H-eigenvalue of proj_1 + proj_2.
double compute_c_d(const TransferOperators& ops);

// H^i -> H embedding: block placement of M^i alpha, values preserved.
RkhsFunction upload(const FusionSpace& fusion, const RkhsFunction& f);

// H -> H^1 x H^2 download, normalized by c_d.  Components are re-expressed in
// the agent bases; a component that is not representable in its agent block
// within relative residual 1e-6 raises.
std::pair<RkhsFunction, RkhsFunction> download(const FusionSpace& fusion,
                                               const TransferOperators& ops,
                                               const RkhsFunction& f);

// Operator norm under the H metric of a coefficient-space matrix.
double h_operator_norm(const TransferOperators& ops, const Mat& a);

struct DownloadNormEstimate {
  double value = 0.0;
  int samples = 0;
};

// Sampled operator norm of the normalized download; the top generalized
// eigendirection is always among the candidates.
DownloadNormEstimate estimate_download_norm(const FusionSpace& fusion,
                                            const TransferOperators& ops, int samples,
                                            uint64_t seed);

// Diagnostic dump: operator matrices and eigenvalue lists as CSV files.
void dump_operator_csv(const TransferOperators& ops, const std::string& directory);

}  // namespace maea

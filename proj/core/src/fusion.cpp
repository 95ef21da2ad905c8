#include "maea/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "maea/rng.hpp"
#include "maea/serialize.hpp"

namespace maea {

Vec reconstruct_targets(const Mat& gram, const Vec& alpha, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  return gram * alpha + rho * alpha;
}

Vec ridge_fit(const Mat& gram, const Vec& y, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  Mat a = gram + rho * Mat::Identity(gram.rows(), gram.cols());
  return Eigen::LDLT<Mat>(a).solve(y);
}

VirtualTargets reconstruct_all(const FusionSpace& fusion, const RkhsFunction& uploaded_1,
                               const RkhsFunction& uploaded_2, double rho_1, double rho_2) {
  const int m = fusion.m();
  if (uploaded_1.tag != SpaceTag::fusion || uploaded_2.tag != SpaceTag::fusion)
    throw std::invalid_argument("reconstruction takes uploaded fusion-space functions");
  VirtualTargets t;
  t.rho_used_1 = rho_1;
  t.rho_used_2 = rho_2;
  t.y_hat_1 = reconstruct_targets(fusion.gram_block_1, uploaded_1.coefficients.head(m), rho_1);
  t.y_hat_2 = reconstruct_targets(fusion.gram_block_2, uploaded_2.coefficients.tail(m), rho_2);
  t.stacked.resize(2 * m);
  t.stacked << t.y_hat_1, t.y_hat_2;
  return t;
}

namespace {

// min-norm solution of (K^T K + rho K) beta = K^T y on the retained spectrum
Vec p3_solve(const SymEig& eig, const Vec& y, double rho) {
  Vec proj = eig.vectors_r.transpose() * y;
  Vec scaled = proj.array() / (eig.lambda_r.array() + rho);
  return eig.vectors_r * scaled;
}

}  // namespace

RkhsFunction fuse(const FusionSpace& fusion, const VirtualTargets& targets, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  SymEig eig = sym_eig_clamped(fusion.gram_full, 1e-12);
  if (eig.retained() == 0) throw std::runtime_error("gram_full is zero beyond clamp");
  RkhsFunction out;
  out.tag = SpaceTag::fusion;
  out.coefficients = p3_solve(eig, targets.stacked, rho);
  return out;
}

Vec fusion_coefficient_map(const FusionSpace& fusion, const SymEig& gram_eig, const Vec& block_1,
                           const Vec& block_2, double rho) {
  const int m = fusion.m();
  Vec y(2 * m);
  y.head(m) = reconstruct_targets(fusion.gram_block_1, block_1, rho);
  y.tail(m) = reconstruct_targets(fusion.gram_block_2, block_2, rho);
  return p3_solve(gram_eig, y, rho);
}

double fusion_phi(const FusionSpace& fusion, const SymEig& gram_eig, const Vec& block_1,
                  const Vec& block_2, double rho) {
  Vec beta = fusion_coefficient_map(fusion, gram_eig, block_1, block_2, rho);
  return quad_form(beta, fusion.gram_full);
}

namespace {

// columns: block-coordinate directions ahat = M^i alpha with unit H mass,
// K-orthonormal, spanning the admissible (range of M^i) part of the block.
// Zero directions of the block quadratic form are excluded.
Mat e_direction_basis(const FusionSpace& fusion, int agent) {
  const int m = fusion.m();
  const Mat& mi = change_of_basis(fusion, agent);
  const Mat& kt = agent == 1 ? fusion.gram_block_1 : fusion.gram_block_2;
  Mat q = mi.transpose() * kt * mi;
  SymEig eig = sym_eig_clamped(0.5 * (q + q.transpose()), 1e-10);
  Mat dirs(m, eig.retained());
  for (int k = 0; k < eig.retained(); ++k)
    dirs.col(k) = mi * (eig.vectors_r.col(k) / std::sqrt(eig.lambda_r(k)));
  return dirs;
}

}  // namespace

std::vector<std::pair<Vec, Vec>> sample_E(const FusionSpace& fusion, int count, uint64_t seed,
                                          int slice_agent) {
  // block coordinates ahat^i = M^i alpha^i carry the H norm through the block
  // Gram: |f^i|_H^2 = ahat^T Kt^i ahat.  Sampling runs in the retained
  // eigenspace of the M^i-weighted quadratic form, which excludes zero
  // directions.
  const int m = fusion.m();
  Mat d1 = e_direction_basis(fusion, 1);
  Mat d2 = e_direction_basis(fusion, 2);
  int r1 = slice_agent == 2 ? 0 : static_cast<int>(d1.cols());
  int r2 = slice_agent == 1 ? 0 : static_cast<int>(d2.cols());
  if (r1 + r2 == 0) throw std::runtime_error("E set is degenerate: zero quadratic form");

  std::vector<std::pair<Vec, Vec>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng = SplitMix64::stream(seed, static_cast<uint64_t>(i));
    Vec c(r1 + r2);
    for (int k = 0; k < c.size(); ++k) c(k) = rng.normal();
    if (c.norm() == 0.0) c(0) = 1.0;
    c.normalize();
    Vec a1 = r1 > 0 ? Vec(d1.leftCols(r1) * c.head(r1)) : Vec(Vec::Zero(m));
    Vec a2 = r2 > 0 ? Vec(d2.leftCols(r2) * c.tail(r2)) : Vec(Vec::Zero(m));
    out.emplace_back(a1, a2);
  }
  return out;
}

OperatorNormEstimate estimate_T_norm(const FusionSpace& fusion, double rho,
                                     const FusionNormConfig& cfg) {
  SymEig gram_eig = sym_eig_clamped(fusion.gram_full, 1e-12);

  OperatorNormEstimate est;
  est.samples = cfg.sampling.samples;
  est.refinement_iters = cfg.sampling.refinement_iters;
  est.seed = cfg.sampling.seed;

  const int m = fusion.m();
  Mat d1 = e_direction_basis(fusion, 1);
  Mat d2 = e_direction_basis(fusion, 2);
  int r1 = cfg.slice_agent == 2 ? 0 : static_cast<int>(d1.cols());
  int r2 = cfg.slice_agent == 1 ? 0 : static_cast<int>(d2.cols());
  if (r1 + r2 == 0) throw std::runtime_error("E set is degenerate: zero quadratic form");

  // candidates live in the K-orthonormal direction coordinates, so the E
  // membership (and the unit mass |c|^2) is preserved under refinement
  auto blocks_of = [&](const Vec& c) {
    Vec a1 = r1 > 0 ? Vec(d1.leftCols(r1) * c.head(r1)) : Vec(Vec::Zero(m));
    Vec a2 = r2 > 0 ? Vec(d2.leftCols(r2) * c.tail(r2)) : Vec(Vec::Zero(m));
    return std::make_pair(a1, a2);
  };
  auto value_of = [&](const Vec& c) {
    double ms = c.squaredNorm();
    if (ms < 1e-300) return -1.0;
    auto [a1, a2] = blocks_of(c);
    double s = 1.0 / std::sqrt(ms);
    return fusion_phi(fusion, gram_eig, a1 * s, a2 * s, rho);
  };

  std::vector<Vec> pool;
  pool.reserve(cfg.sampling.samples);
  for (int i = 0; i < cfg.sampling.samples; ++i) {
    SplitMix64 rng = SplitMix64::stream(cfg.sampling.seed, static_cast<uint64_t>(i));
    Vec c(r1 + r2);
    for (int k = 0; k < c.size(); ++k) c(k) = rng.normal();
    if (c.norm() == 0.0) c(0) = 1.0;
    c.normalize();
    pool.push_back(c);
  }

  std::vector<std::pair<double, size_t>> ranked;
  for (size_t i = 0; i < pool.size(); ++i) ranked.emplace_back(value_of(pool[i]), i);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double best = ranked.empty() ? -1.0 : ranked.front().first;
  Vec best_c = ranked.empty() ? Vec(Vec::Ones(r1 + r2)) : pool[ranked.front().second];

  int top = std::min<int>(cfg.sampling.refine_top, static_cast<int>(ranked.size()));
  for (int t = 0; t < top; ++t) {
    Vec c = pool[ranked[t].second];
    double v = ranked[t].first;
    double step = 0.25;
    for (int it = 0; it < cfg.sampling.refinement_iters; ++it) {
      for (int coord = 0; coord < c.size(); ++coord) {
        for (double sgn : {1.0, -1.0}) {
          Vec q = c;
          q(coord) += sgn * step;
          double qv = value_of(q);
          if (qv > v) {
            v = qv;
            c = q;
          }
        }
      }
      step *= 0.6;
    }
    if (v > best) {
      best = v;
      best_c = c;
    }
  }

  est.value = std::sqrt(std::max(best, 0.0));
  auto [b1, b2] = blocks_of(best_c);
  double ms = best_c.squaredNorm();
  double s = ms > 0 ? 1.0 / std::sqrt(ms) : 1.0;
  est.argmax_witness.alpha.resize(2 * m);
  est.argmax_witness.alpha << b1 * s, b2 * s;
  return est;
}

SpectralReport spectral_check(const FusionSpace& fusion) {
  const int m = fusion.m();
  SpectralReport r;
  r.kernel_scale = fusion.kernel_scale;
  r.normalization_applied = fusion.kernel_scale != 1.0;
  const Mat& kt1 = fusion.gram_block_1;
  const Mat& kt2 = fusion.gram_block_2;
  const Mat& k12 = fusion.cross_block;

  SymEig e2 = sym_eig_clamped(kt2, 1e-14);
  if (e2.retained() < m)
    throw std::runtime_error("second block Gram is singular; increase the jitter");

  r.lambda_max_K = Eigen::SelfAdjointEigenSolver<Mat>(fusion.gram_full).eigenvalues().maxCoeff();
  r.lambda_max_Kt1 = Eigen::SelfAdjointEigenSolver<Mat>(kt1).eigenvalues().maxCoeff();
  r.lambda_max_Kt2 = Eigen::SelfAdjointEigenSolver<Mat>(kt2).eigenvalues().maxCoeff();

  Mat c = k12 * e2.pinv();  // K12 * Kt2^{-1}
  Mat schur = kt1 - c * k12.transpose();
  Mat d = Mat::Zero(2 * m, 2 * m);
  d.topLeftCorner(m, m) = schur;
  d.bottomRightCorner(m, m) = kt2;
  Mat p_t = Mat::Identity(2 * m, 2 * m);
  p_t.topRightCorner(m, m) = c;
  Mat recon = p_t * d * p_t.transpose();
  r.schur_residual = (recon - fusion.gram_full).cwiseAbs().maxCoeff() /
                     std::max(fusion.gram_full.cwiseAbs().maxCoeff(), 1e-300);
  r.lambda_max_D = Eigen::SelfAdjointEigenSolver<Mat>(d).eigenvalues().maxCoeff();

  double block_max = std::max(r.lambda_max_Kt1, r.lambda_max_Kt2);
  r.block_bound_holds = r.lambda_max_K <= block_max + 1e-8;
  r.schur_block_bound_holds = r.lambda_max_D <= block_max + 1e-8;
  r.suggested_scale = block_max > 1.0 ? 1.0 / block_max : 1.0;
  return r;
}

std::string spectral_report_text(const SpectralReport& r) {
  std::ostringstream os;
  os << "lambda_max_K " << format_g17(r.lambda_max_K) << "\n";
  os << "lambda_max_Kt1 " << format_g17(r.lambda_max_Kt1) << "\n";
  os << "lambda_max_Kt2 " << format_g17(r.lambda_max_Kt2) << "\n";
  os << "lambda_max_D " << format_g17(r.lambda_max_D) << "\n";
  os << "schur_residual " << format_g17(r.schur_residual) << "\n";
  os << "block_bound_holds " << (r.block_bound_holds ? "true" : "false") << "\n";
  os << "schur_block_bound_holds " << (r.schur_block_bound_holds ? "true" : "false") << "\n";
  os << "normalization_applied " << (r.normalization_applied ? "true" : "false") << "\n";
  os << "kernel_scale " << format_g17(r.kernel_scale) << "\n";
  os << "suggested_scale " << format_g17(r.suggested_scale) << "\n";
  return os.str();
}

}  // namespace maea

#include "maea/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "maea/rng.hpp"
#include "maea/serialize.hpp"

namespace maea {

namespace {

Mat kernel_gram_all(const FusionSpace& fusion, int agent_id) {
  const auto& space = agent_space(fusion, agent_id);
  const int n = fusion.total_points();
  Mat b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = kernel_eval(space, fusion.basis_points[i], fusion.basis_points[j]);
      b(i, j) = v;
      b(j, i) = v;
    }
  return b;
}

// congruence image of pinv(K) * B on the retained spectrum:
// S = Lr^{-1/2} Ur^T B Ur Lr^{-1/2}, symmetric by construction
Mat congruence_image(const SymEig& eig, const Mat& b) {
  Vec inv_sqrt = eig.lambda_r.cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * (eig.vectors_r.transpose() * b * eig.vectors_r) *
         inv_sqrt.asDiagonal();
}

Mat from_retained_operator(const SymEig& eig, const Mat& s) {
  Vec sq = eig.lambda_r.cwiseSqrt();
  Vec inv_sq = sq.cwiseInverse();
  return (eig.vectors_r * inv_sq.asDiagonal()) * s * (sq.asDiagonal() * eig.vectors_r.transpose());
}

struct SqrtProj {
  Mat sqrt_s, proj_s;
};

SqrtProj sqrt_proj_of(const Mat& s, double rank_tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  const Vec& w = es.eigenvalues();
  if (w(0) < -1e-8)
    throw std::runtime_error("operator has a generalized eigenvalue below -1e-8");
  double wmax = std::max(w(w.size() - 1), 0.0);
  double cut = rank_tol * wmax;
  SqrtProj out;
  out.sqrt_s = Mat::Zero(s.rows(), s.cols());
  out.proj_s = Mat::Zero(s.rows(), s.cols());
  for (int k = 0; k < w.size(); ++k) {
    if (w(k) <= cut) continue;
    Vec v = es.eigenvectors().col(k);
    out.sqrt_s += std::sqrt(w(k)) * (v * v.transpose());
    out.proj_s += v * v.transpose();
  }
  return out;
}

}  // namespace

Mat build_lbar(const FusionSpace& fusion, int agent_id, double rank_tol) {
  SymEig eig = sym_eig_clamped(fusion.gram_full, rank_tol);
  if (eig.retained() == 0)
    throw std::runtime_error("gram_full is singular beyond the jitter clamp");
  return from_retained_operator(eig, congruence_image(eig, kernel_gram_all(fusion, agent_id)));
}

TransferOperators build_transfer_operators(const FusionSpace& fusion, double rank_tol) {
  TransferOperators ops;
  ops.rank_tol = rank_tol;
  ops.gram_eig = sym_eig_clamped(fusion.gram_full, rank_tol);
  if (ops.gram_eig.retained() == 0)
    throw std::runtime_error("gram_full is singular beyond the jitter clamp");
  ops.kernel_gram_1 = kernel_gram_all(fusion, 1);
  ops.kernel_gram_2 = kernel_gram_all(fusion, 2);
  ops.s_1 = congruence_image(ops.gram_eig, ops.kernel_gram_1);
  ops.s_2 = congruence_image(ops.gram_eig, ops.kernel_gram_2);

  SqrtProj sp1 = sqrt_proj_of(ops.s_1, rank_tol);
  SqrtProj sp2 = sqrt_proj_of(ops.s_2, rank_tol);
  ops.s_sqrt_1 = sp1.sqrt_s;
  ops.s_sqrt_2 = sp2.sqrt_s;
  ops.s_proj_1 = sp1.proj_s;
  ops.s_proj_2 = sp2.proj_s;

  ops.lbar_1 = from_retained_operator(ops.gram_eig, ops.s_1);
  ops.lbar_2 = from_retained_operator(ops.gram_eig, ops.s_2);
  ops.sqrt_lbar_1 = from_retained_operator(ops.gram_eig, ops.s_sqrt_1);
  ops.sqrt_lbar_2 = from_retained_operator(ops.gram_eig, ops.s_sqrt_2);
  ops.proj_1 = from_retained_operator(ops.gram_eig, ops.s_proj_1);
  ops.proj_2 = from_retained_operator(ops.gram_eig, ops.s_proj_2);

  const int m = fusion.m();
  ops.section_eval_1 = ops.kernel_gram_1.leftCols(m);
  ops.section_eval_2 = ops.kernel_gram_2.rightCols(m);

  Eigen::SelfAdjointEigenSolver<Mat> sum(ops.s_proj_1 + ops.s_proj_2);
  ops.c_d = std::sqrt(std::max(sum.eigenvalues().maxCoeff(), 0.0));
  Mat cross = 0.5 * (ops.s_proj_1 * ops.s_proj_2 + ops.s_proj_2 * ops.s_proj_1);
  ops.c_d_inner = 1.0 + Eigen::SelfAdjointEigenSolver<Mat>(cross).eigenvalues().maxCoeff();
  return ops;
}

std::pair<Mat, Mat> sqrt_and_projection(const Mat& lbar, const Mat& gram_full,
                                        double rank_tol) {
  SymEig eig = sym_eig_clamped(gram_full, 1e-12);
  Vec sq = eig.lambda_r.cwiseSqrt();
  Mat s = sq.asDiagonal() * (eig.vectors_r.transpose() * lbar * eig.vectors_r) *
          sq.cwiseInverse().asDiagonal();
  s = 0.5 * (s + s.transpose());  // symmetrize roundoff
  SqrtProj sp = sqrt_proj_of(s, rank_tol);
  return {from_retained_operator(eig, sp.sqrt_s), from_retained_operator(eig, sp.proj_s)};
}

double compute_c_d(const TransferOperators& ops) {
  Eigen::SelfAdjointEigenSolver<Mat> sum(ops.s_proj_1 + ops.s_proj_2);
  return std::sqrt(std::max(sum.eigenvalues().maxCoeff(), 0.0));
}

RkhsFunction upload(const FusionSpace& fusion, const RkhsFunction& f) {
  int agent_id;
  if (f.tag == SpaceTag::agent1)
    agent_id = 1;
  else if (f.tag == SpaceTag::agent2)
    agent_id = 2;
  else
    throw std::invalid_argument("upload takes an agent-space function");
  const int m = fusion.m();
  if (f.coefficients.size() != m)
    throw std::invalid_argument("coefficient length does not match the basis count");
  RkhsFunction out = RkhsFunction::zero(SpaceTag::fusion, 2 * m);
  Vec block = to_block_coordinates(fusion, agent_id, f.coefficients);
  if (agent_id == 1)
    out.coefficients.head(m) = block;
  else
    out.coefficients.tail(m) = block;
  return out;
}

namespace {

// express a fusion-coordinate function lying in H^i over the agent sections
Vec express_in_agent_basis(const FusionSpace& fusion, const TransferOperators& ops,
                           int agent_id, const Vec& coeffs) {
  const Mat& eval_cols = agent_id == 1 ? ops.section_eval_1 : ops.section_eval_2;
  Vec target = fusion.gram_full * coeffs;  // values at every basis point
  Vec gamma = lstsq(eval_cols, target);
  double scale = std::max(target.norm(), 1e-300);
  double resid = (eval_cols * gamma - target).norm() / scale;
  if (resid > 1e-6)
    throw std::runtime_error(
        "downloaded component is not representable in its agent block (projection broken)");
  return gamma;
}

}  // namespace

std::pair<RkhsFunction, RkhsFunction> download(const FusionSpace& fusion,
                                               const TransferOperators& ops,
                                               const RkhsFunction& f) {
  if (f.tag != SpaceTag::fusion)
    throw std::invalid_argument("download takes a fusion-space function");
  Vec c = ops.to_retained(f.coefficients);
  auto component = [&](const Mat& sqrt_s, const Mat& proj_s, int agent_id) {
    Vec out_c = (sqrt_s * (proj_s * c)) / ops.c_d;
    Vec coeffs = ops.from_retained(out_c);
    RkhsFunction g;
    g.tag = agent_id == 1 ? SpaceTag::agent1 : SpaceTag::agent2;
    g.coefficients = express_in_agent_basis(fusion, ops, agent_id, coeffs);
    return g;
  };
  return {component(ops.s_sqrt_1, ops.s_proj_1, 1), component(ops.s_sqrt_2, ops.s_proj_2, 2)};
}

double h_operator_norm(const TransferOperators& ops, const Mat& a) {
  Vec sq = ops.gram_eig.lambda_r.cwiseSqrt();
  Mat s = sq.asDiagonal() * (ops.gram_eig.vectors_r.transpose() * a * ops.gram_eig.vectors_r) *
          sq.cwiseInverse().asDiagonal();
  return spectral_norm(s);
}

DownloadNormEstimate estimate_download_norm(const FusionSpace& fusion,
                                            const TransferOperators& ops, int samples,
                                            uint64_t seed) {
  DownloadNormEstimate est;
  est.samples = samples;
  const int r = ops.gram_eig.retained();
  auto ratio_sq = [&](const Vec& c) {
    RkhsFunction f;
    f.tag = SpaceTag::fusion;
    f.coefficients = ops.from_retained(c);
    auto [g1, g2] = download(fusion, ops, f);
    double num = quad_form(g1.coefficients, fusion.space1.gram_local) +
                 quad_form(g2.coefficients, fusion.space2.gram_local);
    return num / c.squaredNorm();
  };
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    SplitMix64 rng = SplitMix64::stream(seed, static_cast<uint64_t>(i));
    Vec c(r);
    for (int k = 0; k < r; ++k) c(k) = rng.normal();
    if (c.norm() == 0.0) continue;
    best = std::max(best, ratio_sq(c));
  }
  // the maximizer is the top eigendirection of proj_1 + proj_2
  Eigen::SelfAdjointEigenSolver<Mat> sum(ops.s_proj_1 + ops.s_proj_2);
  Vec top = sum.eigenvectors().col(r - 1);
  best = std::max(best, ratio_sq(top));
  est.value = std::sqrt(best);
  return est;
}

void dump_operator_csv(const TransferOperators& ops, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  write_matrix_csv((fs::path(directory) / "lbar_1.csv").string(), ops.lbar_1);
  write_matrix_csv((fs::path(directory) / "lbar_2.csv").string(), ops.lbar_2);
  write_matrix_csv((fs::path(directory) / "sqrt_lbar_1.csv").string(), ops.sqrt_lbar_1);
  write_matrix_csv((fs::path(directory) / "sqrt_lbar_2.csv").string(), ops.sqrt_lbar_2);
  write_matrix_csv((fs::path(directory) / "proj_1.csv").string(), ops.proj_1);
  write_matrix_csv((fs::path(directory) / "proj_2.csv").string(), ops.proj_2);
  std::ofstream out(fs::path(directory) / "eigenvalues.csv");
  out << "operator,index,value\n";
  auto dump_eigs = [&](const char* name, const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      out << name << "," << i << "," << format_g17(es.eigenvalues()(i)) << "\n";
  };
  dump_eigs("lbar_1", ops.s_1);
  dump_eigs("lbar_2", ops.s_2);
  out << "c_d,0," << format_g17(ops.c_d) << "\n";
  out << "c_d_inner,0," << format_g17(ops.c_d_inner) << "\n";
}

}  // namespace maea

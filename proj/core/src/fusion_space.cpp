#include "maea/fusion_space.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace maea {

double fusion_kernel_eval(const FusionSpace& fusion, const Vec& x, const Vec& y) {
  // computed as the sum of the two scaled agent kernels, never re-derived,
  // so K = K1 + K2 holds bit-exactly
  return kernel_eval(fusion.space1, x, y) + kernel_eval(fusion.space2, x, y);
}

Vec fusion_section_at(const FusionSpace& fusion, const Vec& x) {
  Vec k(fusion.total_points());
  for (int j = 0; j < fusion.total_points(); ++j)
    k(j) = fusion_kernel_eval(fusion, x, fusion.basis_points[j]);
  return k;
}

namespace {

double raw_sum_kernel(const KnowledgeSpace& s1, const KnowledgeSpace& s2, const Vec& x,
                      const Vec& y) {
  return kernel_eval(s1, x, y) + kernel_eval(s2, x, y);
}

Mat gram_of(const std::vector<Vec>& pts, const KnowledgeSpace& s1, const KnowledgeSpace& s2) {
  const int n = static_cast<int>(pts.size());
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = raw_sum_kernel(s1, s2, pts[i], pts[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

bool is_taken(const Vec& c, const std::vector<Vec>& taken) {
  for (const auto& t : taken)
    if ((c - t).lpNorm<Eigen::Infinity>() == 0.0) return true;
  return false;
}

// Greedy basis-point selection: add the candidate maximizing lambda_min of the
// incremental sum-kernel Gram.  Duplicates are rejected before conditioning.
std::vector<Vec> greedy_select(const std::vector<Vec>& candidates, int m,
                               const std::vector<Vec>& taken, const KnowledgeSpace& s1,
                               const KnowledgeSpace& s2) {
  std::vector<Vec> sel;
  sel.reserve(m);
  for (int step = 0; step < m; ++step) {
    double best_val = -1.0;
    const Vec* best = nullptr;
    for (const auto& c : candidates) {
      if (is_taken(c, taken) || is_taken(c, sel)) continue;
      std::vector<Vec> trial = sel;
      trial.push_back(c);
      Mat g = gram_of(trial, s1, s2);
      double lmin = Eigen::SelfAdjointEigenSolver<Mat>(g).eigenvalues()(0);
      if (lmin > best_val) {
        best_val = lmin;
        best = &c;
      }
    }
    if (!best) throw std::runtime_error("candidate pool exhausted during basis selection");
    sel.push_back(*best);
  }
  return sel;
}

double condition_of(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  double lmin = es.eigenvalues()(0);
  double lmax = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
  return lmax / lmin;
}

}  // namespace

FusionSpace build_fusion_space(const KnowledgeSpace& s1, const KnowledgeSpace& s2,
                               const SelectionConfig& cfg) {
  if (s1.domain.dim() != s2.domain.dim() ||
      (s1.domain.lower - s2.domain.lower).lpNorm<Eigen::Infinity>() != 0.0 ||
      (s1.domain.upper - s2.domain.upper).lpNorm<Eigen::Infinity>() != 0.0)
    throw std::invalid_argument("agent spaces must share the domain box");
  if (s1.agent_id == s2.agent_id)
    throw std::invalid_argument("fusion needs one space per agent id");

  const int m = s1.dictionary_size() + s2.dictionary_size();

  std::vector<Vec> x1 = cfg.basis_points_1;
  std::vector<Vec> x2 = cfg.basis_points_2;
  double best_cond = std::numeric_limits<double>::infinity();
  if (x1.empty() || x2.empty()) {
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
      int ncand = cfg.candidates << attempt;
      std::vector<Vec> cands;
      cands.reserve(ncand);
      for (int i = 0; i < ncand; ++i)
        cands.push_back(s1.domain.halton_point(static_cast<uint64_t>(i) + 1));
      x1 = greedy_select(cands, m, {}, s1, s2);
      x2 = greedy_select(cands, m, x1, s1, s2);
      double c1 = condition_of(gram_of(x1, s1, s2));
      double c2 = condition_of(gram_of(x2, s1, s2));
      best_cond = std::min(best_cond, std::max(c1, c2));
      ok = std::max(c1, c2) <= cfg.condition_cap;
    }
    if (!ok) {
      std::ostringstream os;
      os << "basis-point selection failed: best per-set condition number " << best_cond
         << " exceeds cap " << cfg.condition_cap;
      throw std::runtime_error(os.str());
    }
  } else {
    if (static_cast<int>(x1.size()) != m || static_cast<int>(x2.size()) != m)
      throw std::invalid_argument("explicit basis point sets must each hold m points");
    for (const auto& a : x1)
      if (is_taken(a, x2)) throw std::invalid_argument("agent basis point sets must be disjoint");
    double c1 = condition_of(gram_of(x1, s1, s2));
    double c2 = condition_of(gram_of(x2, s1, s2));
    if (std::max(c1, c2) > cfg.condition_cap) {
      std::ostringstream os;
      os << "explicit basis points give per-set condition number " << std::max(c1, c2)
         << " above cap " << cfg.condition_cap;
      throw std::runtime_error(os.str());
    }
  }

  // one-time global kernel scale: max block eigenvalue becomes exactly 1
  Mat kt1_raw = gram_of(x1, s1, s2);
  Mat kt2_raw = gram_of(x2, s1, s2);
  double l1 = Eigen::SelfAdjointEigenSolver<Mat>(kt1_raw).eigenvalues().maxCoeff();
  double l2 = Eigen::SelfAdjointEigenSolver<Mat>(kt2_raw).eigenvalues().maxCoeff();
  double scale = 1.0 / std::max(l1, l2);

  FusionSpace fusion;
  fusion.kernel_scale = scale;
  fusion.space1 = s1;
  fusion.space2 = s2;
  fusion.space1.scale = s1.scale * scale;
  fusion.space2.scale = s2.scale * scale;
  assign_basis_points(fusion.space1, x1);
  assign_basis_points(fusion.space2, x2);

  fusion.basis_points = x1;
  fusion.basis_points.insert(fusion.basis_points.end(), x2.begin(), x2.end());

  const int n = fusion.total_points();
  fusion.gram_full.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = fusion_kernel_eval(fusion, fusion.basis_points[i], fusion.basis_points[j]);
      fusion.gram_full(i, j) = v;
      fusion.gram_full(j, i) = v;
    }
  fusion.gram_block_1 = fusion.gram_full.topLeftCorner(m, m);
  fusion.gram_block_2 = fusion.gram_full.bottomRightCorner(m, m);
  fusion.cross_block = fusion.gram_full.topRightCorner(m, m);

  // M^i solves Kt^i M^i = local Gram; residual gate per contract
  auto solve_change = [&](const Mat& kt, const Mat& local) {
    SymEig eig = sym_eig_clamped(kt, 1e-14);
    if (eig.retained() < kt.rows())
      throw std::runtime_error("per-agent fusion Gram block is numerically singular");
    Mat mi(kt.rows(), kt.cols());
    for (int c = 0; c < local.cols(); ++c) mi.col(c) = eig.pinv_apply(local.col(c));
    double resid = (kt * mi - local).cwiseAbs().maxCoeff();
    if (resid > 1e-8)
      throw std::runtime_error("change-of-basis residual exceeds 1e-8");
    return mi;
  };
  fusion.change_basis_1 = solve_change(fusion.gram_block_1, fusion.space1.gram_local);
  fusion.change_basis_2 = solve_change(fusion.gram_block_2, fusion.space2.gram_local);
  return fusion;
}

const Mat& change_of_basis(const FusionSpace& fusion, int agent_id) {
  if (agent_id == 1) return fusion.change_basis_1;
  if (agent_id == 2) return fusion.change_basis_2;
  throw std::invalid_argument("agent_id must be 1 or 2");
}

Vec to_block_coordinates(const FusionSpace& fusion, int agent_id, const Vec& alpha) {
  return change_of_basis(fusion, agent_id) * alpha;
}

static void require_fusion_hosted(const FusionSpace& fusion, const RkhsFunction& f) {
  if (f.tag != SpaceTag::fusion)
    throw std::invalid_argument("function is hosted in a different space");
  if (f.coefficients.size() != fusion.total_points())
    throw std::invalid_argument("coefficient length does not match the fusion basis count");
}

double rkhs_inner(const FusionSpace& fusion, const RkhsFunction& f, const RkhsFunction& g) {
  require_fusion_hosted(fusion, f);
  require_fusion_hosted(fusion, g);
  return f.coefficients.dot(fusion.gram_full * g.coefficients);
}

double rkhs_norm(const FusionSpace& fusion, const RkhsFunction& f) {
  require_fusion_hosted(fusion, f);
  return gram_norm(f.coefficients, fusion.gram_full);
}

double evaluate(const FusionSpace& fusion, const RkhsFunction& f, const Vec& x) {
  require_fusion_hosted(fusion, f);
  return fusion_section_at(fusion, x).dot(f.coefficients);
}

const KnowledgeSpace& agent_space(const FusionSpace& fusion, int agent_id) {
  if (agent_id == 1) return fusion.space1;
  if (agent_id == 2) return fusion.space2;
  throw std::invalid_argument("agent_id must be 1 or 2");
}

}  // namespace maea

#include "maea/space.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace maea {

double kernel_eval(const KnowledgeSpace& space, const Vec& x, const Vec& y) {
  double s = 0.0;
  for (const auto& f : space.features) s += eval_feature(f, x) * eval_feature(f, y);
  return space.scale * s;
}

Vec kernel_section_at(const KnowledgeSpace& space, const Vec& x) {
  Vec k(space.basis_size());
  for (int j = 0; j < space.basis_size(); ++j)
    k(j) = kernel_eval(space, x, space.basis_points[j]);
  return k;
}

void check_feature_independence(const std::vector<FeatureDescriptor>& features,
                                const DomainBox& domain, const IndependenceConfig& cfg) {
  const int nf = static_cast<int>(features.size());
  if (nf == 0) throw std::invalid_argument("dictionary must hold at least one feature");
  const int ns = std::max(cfg.oversample * nf, 16);
  Mat samples(ns, nf);
  for (int p = 0; p < ns; ++p) {
    Vec x = domain.halton_point(static_cast<uint64_t>(p) + 1);
    for (int j = 0; j < nf; ++j) samples(p, j) = eval_feature(features[j], x);
  }
  // incremental check so the first dependent feature can be named
  for (int j = 0; j < nf; ++j) {
    Mat sub = samples.leftCols(j + 1);
    Eigen::JacobiSVD<Mat> svd(sub);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(j);
    if (smax <= 0.0 || smin / smax < cfg.min_singular_ratio) {
      std::ostringstream os;
      os << "features are linearly dependent: feature index " << j << " ("
         << describe(features[j]) << ") lies in the span of its predecessors";
      throw std::invalid_argument(os.str());
    }
  }
}

static void validate_points(const std::vector<Vec>& pts, const DomainBox& domain) {
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!domain.contains(pts[i]))
      throw std::invalid_argument("basis point outside the domain box");
    for (size_t j = i + 1; j < pts.size(); ++j)
      if ((pts[i] - pts[j]).lpNorm<Eigen::Infinity>() == 0.0)
        throw std::invalid_argument("basis points must be pairwise distinct");
  }
}

void assign_basis_points(KnowledgeSpace& space, std::vector<Vec> basis_points) {
  validate_points(basis_points, space.domain);
  space.basis_points = std::move(basis_points);
  const int m = space.basis_size();
  space.gram_local.resize(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k <= j; ++k) {
      double v = kernel_eval(space, space.basis_points[j], space.basis_points[k]);
      space.gram_local(j, k) = v;
      space.gram_local(k, j) = v;
    }
  if (sym_residual(space.gram_local) > 1e-12)
    throw std::runtime_error("local Gram symmetry residual exceeds 1e-12");
  space.jitter = m > 0 ? 1e-10 * space.gram_local.trace() / m : 0.0;
}

KnowledgeSpace build_knowledge_space(int agent_id, std::vector<FeatureDescriptor> features,
                                     DomainBox domain, std::vector<Vec> basis_points,
                                     const IndependenceConfig& cfg) {
  if (agent_id != 1 && agent_id != 2) throw std::invalid_argument("agent_id must be 1 or 2");
  check_feature_independence(features, domain, cfg);
  KnowledgeSpace space;
  space.agent_id = agent_id;
  space.features = std::move(features);
  space.domain = std::move(domain);
  if (!basis_points.empty()) assign_basis_points(space, std::move(basis_points));
  return space;
}

static void require_hosted(const KnowledgeSpace& space, const RkhsFunction& f) {
  if (f.tag != space.tag())
    throw std::invalid_argument("function is hosted in a different space");
  if (f.coefficients.size() != space.basis_size())
    throw std::invalid_argument("coefficient length does not match the basis count");
}

double rkhs_inner(const KnowledgeSpace& space, const RkhsFunction& f, const RkhsFunction& g) {
  require_hosted(space, f);
  require_hosted(space, g);
  return f.coefficients.dot(space.gram_local * g.coefficients);
}

double rkhs_norm(const KnowledgeSpace& space, const RkhsFunction& f) {
  require_hosted(space, f);
  return gram_norm(f.coefficients, space.gram_local);
}

double evaluate(const KnowledgeSpace& space, const RkhsFunction& f, const Vec& x) {
  require_hosted(space, f);
  return kernel_section_at(space, x).dot(f.coefficients);
}

}  // namespace maea

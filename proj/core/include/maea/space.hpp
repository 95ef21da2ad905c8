#pragma once

#include <optional>
#include <vector>

#include "maea/feature.hpp"

namespace maea {

enum class SpaceTag { agent1, agent2, fusion };

struct DataPoint {
  Vec x;
  double y = 0.0;
};

// A function as a coefficient vector over its hosting space's kernel-section
// basis.  psi embeddings carry the generating data point as provenance.
struct RkhsFunction {
  SpaceTag tag = SpaceTag::agent1;
  Vec coefficients;
  std::optional<DataPoint> provenance;

  static RkhsFunction zero(SpaceTag tag, int n) {
    RkhsFunction f;
    f.tag = tag;
    f.coefficients = Vec::Zero(n);
    return f;
  }
};

// An agent's finite dictionary, its kernel and the Gram data at the basis
// points.  `scale` multiplies the kernel globally (set by fusion-space
// construction so the larger block eigenvalue is 1); standalone spaces have 1.
struct KnowledgeSpace {
  int agent_id = 1;  // 1 or 2
  std::vector<FeatureDescriptor> features;
  DomainBox domain;
  std::vector<Vec> basis_points;
  Mat gram_local;    // K^i(xbar_j, xbar_k), scaled
  double jitter = 0.0;
  double scale = 1.0;

  int dictionary_size() const { return static_cast<int>(features.size()); }
  int basis_size() const { return static_cast<int>(basis_points.size()); }
  SpaceTag tag() const { return agent_id == 1 ? SpaceTag::agent1 : SpaceTag::agent2; }
};

struct IndependenceConfig {
  double min_singular_ratio = 1e-10;  // smallest/largest singular value of the feature Gram
  int oversample = 3;                 // sample points per feature, at least
};

double kernel_eval(const KnowledgeSpace& space, const Vec& x, const Vec& y);

// Vector [K^i(x, xbar_1), ..., K^i(x, xbar_m)].
Vec kernel_section_at(const KnowledgeSpace& space, const Vec& x);

// Verifies linear independence of the dictionary on sampled domain points.
// Throws naming the first offending feature index when dependent.
void check_feature_independence(const std::vector<FeatureDescriptor>& features,
                                const DomainBox& domain, const IndependenceConfig& cfg = {});

KnowledgeSpace build_knowledge_space(int agent_id, std::vector<FeatureDescriptor> features,
                                     DomainBox domain,
                                     std::vector<Vec> basis_points = {},
                                     const IndependenceConfig& cfg = {});

// Fills in basis points (and the Gram data) on a space built without them.
void assign_basis_points(KnowledgeSpace& space, std::vector<Vec> basis_points);

double rkhs_inner(const KnowledgeSpace& space, const RkhsFunction& f, const RkhsFunction& g);
double rkhs_norm(const KnowledgeSpace& space, const RkhsFunction& f);

double evaluate(const KnowledgeSpace& space, const RkhsFunction& f, const Vec& x);

}  // namespace maea

#pragma once

#include <string>
#include <vector>

#include "maea/linalg.hpp"

namespace maea {

enum class FeatureKind { monomial, gaussian, sinusoid };

// One dictionary entry; fully determines a continuous map on the domain box.
//   monomial(d):          prod_k x_k^d
//   gaussian(c, w):       exp(-|x - c|^2 / (2 w^2)), w > 0
//   sinusoid(freq, ph):   sin(freq * sum_k x_k + ph)
struct FeatureDescriptor {
  FeatureKind kind = FeatureKind::monomial;
  int degree = 0;
  Vec center;
  double width = 1.0;
  double frequency = 1.0;
  double phase = 0.0;

  static FeatureDescriptor make_monomial(int degree);
  static FeatureDescriptor make_gaussian(Vec center, double width);
  static FeatureDescriptor make_sinusoid(double frequency, double phase);
};

struct DomainBox {
  Vec lower;
  Vec upper;

  DomainBox() = default;
  DomainBox(Vec lo, Vec hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x, double slack = 1e-12) const;
  Vec halton_point(uint64_t index) const;
};

double eval_feature(const FeatureDescriptor& desc, const Vec& x);

std::string describe(const FeatureDescriptor& desc);

}  // namespace maea

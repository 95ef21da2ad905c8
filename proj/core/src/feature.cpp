#include "maea/feature.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "maea/rng.hpp"

namespace maea {

FeatureDescriptor FeatureDescriptor::make_monomial(int degree) {
  if (degree < 0) throw std::invalid_argument("monomial degree must be >= 0");
  FeatureDescriptor d;
  d.kind = FeatureKind::monomial;
  d.degree = degree;
  return d;
}

FeatureDescriptor FeatureDescriptor::make_gaussian(Vec center, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian width must be > 0");
  FeatureDescriptor d;
  d.kind = FeatureKind::gaussian;
  d.center = std::move(center);
  d.width = width;
  return d;
}

FeatureDescriptor FeatureDescriptor::make_sinusoid(double frequency, double phase) {
  FeatureDescriptor d;
  d.kind = FeatureKind::sinusoid;
  d.frequency = frequency;
  d.phase = phase;
  return d;
}

DomainBox::DomainBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("domain box needs matching nonempty bounds");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower(i) < upper(i)))
      throw std::invalid_argument("domain box needs lower < upper componentwise");
}

bool DomainBox::contains(const Vec& x, double slack) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x(i) < lower(i) - slack || x(i) > upper(i) + slack) return false;
  return true;
}

Vec DomainBox::halton_point(uint64_t index) const {
  Vec p(dim());
  for (int d = 0; d < dim(); ++d)
    p(d) = lower(d) + (upper(d) - lower(d)) * halton(index, nth_prime_base(d));
  return p;
}

double eval_feature(const FeatureDescriptor& desc, const Vec& x) {
  double v = 0.0;
  switch (desc.kind) {
    case FeatureKind::monomial: {
      v = 1.0;
      for (int i = 0; i < x.size(); ++i) v *= std::pow(x(i), desc.degree);
      break;
    }
    case FeatureKind::gaussian: {
      if (desc.center.size() != x.size())
        throw std::invalid_argument("gaussian center dimension mismatch");
      double d2 = (x - desc.center).squaredNorm();
      v = std::exp(-d2 / (2.0 * desc.width * desc.width));
      break;
    }
    case FeatureKind::sinusoid:
      v = std::sin(desc.frequency * x.sum() + desc.phase);
      break;
  }
  if (!std::isfinite(v)) throw std::domain_error("feature evaluation is not finite");
  return v;
}

std::string describe(const FeatureDescriptor& desc) {
  std::ostringstream os;
  switch (desc.kind) {
    case FeatureKind::monomial:
      os << "monomial(" << desc.degree << ")";
      break;
    case FeatureKind::gaussian:
      os << "gaussian(width=" << desc.width << ")";
      break;
    case FeatureKind::sinusoid:
      os << "sinusoid(" << desc.frequency << "," << desc.phase << ")";
      break;
  }
  return os.str();
}

}  // namespace maea

#include "maea/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maea/rng.hpp"

namespace maea {

RhoSchedule RhoSchedule::power(double rho0, double p) {
  if (!(rho0 > 0.0) || p < 0.0)
    throw std::invalid_argument("power schedule needs rho0 > 0 and p >= 0");
  RhoSchedule s;
  s.kind = RhoKind::power;
  s.rho0 = rho0;
  s.param = p;
  return s;
}

RhoSchedule RhoSchedule::geometric(double rho0, double r) {
  if (!(rho0 > 0.0) || r < 1.0)
    throw std::invalid_argument("geometric schedule needs rho0 > 0 and r >= 1");
  RhoSchedule s;
  s.kind = RhoKind::geometric;
  s.rho0 = rho0;
  s.param = r;
  return s;
}

RhoSchedule RhoSchedule::explicit_values(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("explicit schedule needs values");
  double prev = 0.0;
  for (double v : values) {
    if (!(v > 0.0) || v < prev)
      throw std::invalid_argument("explicit schedule must be positive and nondecreasing");
    prev = v;
  }
  RhoSchedule s;
  s.kind = RhoKind::explicit_list;
  s.values = std::move(values);
  return s;
}

double RhoSchedule::value(int n) const {
  if (n < 1) throw std::invalid_argument("schedule index starts at 1");
  switch (kind) {
    case RhoKind::power:
      return rho0 * std::pow(static_cast<double>(n), param);
    case RhoKind::geometric:
      return rho0 * std::pow(param, static_cast<double>(n));
    case RhoKind::explicit_list:
      if (n > static_cast<int>(values.size()))
        throw std::out_of_range("explicit schedule exhausted");
      return values[n - 1];
  }
  return rho0;
}

bool RhoSchedule::diverges() const {
  switch (kind) {
    case RhoKind::power:
      return param > 0.0;
    case RhoKind::geometric:
      return param > 1.0;
    case RhoKind::explicit_list:
      return false;
  }
  return false;
}

RkhsFunction psi_embed(const KnowledgeSpace& space, const Vec& x, double y) {
  if (!space.domain.contains(x)) throw std::invalid_argument("psi point outside the domain");
  RkhsFunction psi;
  psi.tag = space.tag();
  psi.coefficients = y * kernel_section_at(space, x);
  psi.provenance = DataPoint{x, y};
  return psi;
}

RkhsFunction local_update(const KnowledgeSpace& space, const RkhsFunction& f_prev, const Vec& x,
                          double y, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (f_prev.tag != space.tag() || f_prev.coefficients.size() != space.basis_size())
    throw std::invalid_argument("f_prev is not hosted in this space");
  const int m = space.basis_size();
  Vec k = kernel_section_at(space, x);
  Mat exact = rho * space.gram_local + k * k.transpose();
  Mat jittered = exact + (rho * space.jitter) * Mat::Identity(m, m);
  Vec rhs = k * y + rho * (space.gram_local * f_prev.coefficients);
  Eigen::LDLT<Mat> solver(jittered);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("local update system is singular beyond jitter");
  Vec a = solver.solve(rhs);
  // the exact system is consistent; one refinement step collapses the
  // jitter-induced residual so the optimality gate holds at large rho
  a += solver.solve(rhs - exact * a);
  // the solve amplifies roundoff along the Gram's null space by 1/(rho*jitter);
  // the range projection returns the canonical representative (same function,
  // same residual: the section vector lies in the Gram's range)
  a = sym_eig_clamped(space.gram_local, 1e-12).range_project(a);
  RkhsFunction out;
  out.tag = space.tag();
  out.coefficients = a;
  return out;
}

RkhsFunction apply_Tbar(const KnowledgeSpace& space, double rho, const RkhsFunction& f,
                        const RkhsFunction& psi) {
  if (!psi.provenance)
    throw std::invalid_argument("psi carries no generating data point");
  return local_update(space, f, psi.provenance->x, psi.provenance->y, rho);
}

double agent_phi(const KnowledgeSpace& space, double rho, const Vec& alpha, const Vec& x,
                 double y) {
  const int m = space.basis_size();
  Vec k = kernel_section_at(space, x);
  Vec v = k * (y / rho) + space.gram_local * alpha;
  Mat a = space.gram_local + space.jitter * Mat::Identity(m, m) +
          (k * k.transpose()) / rho;
  Vec w = Eigen::LDLT<Mat>(a).solve(v);
  return quad_form(w, space.gram_local);
}

namespace {

// A point of E^i in raw parameters: direction d, location x, mass split t.
struct EiPoint {
  Vec dir;
  Vec x;
  double t = 0.5;
  double y_sign = 1.0;
};

struct EiRealized {
  Vec alpha;
  Vec x;
  double y = 0.0;
  bool feasible = false;
};

EiRealized realize(const KnowledgeSpace& space, const EiPoint& p) {
  EiRealized r;
  r.x = p.x;
  Vec k = kernel_section_at(space, p.x);
  double q = quad_form(k, space.gram_local);       // |psi|^2 for y = 1
  double fq = quad_form(p.dir, space.gram_local);  // |f|^2 for alpha = dir
  double t = p.t;
  if (fq < 1e-14) t = 0.0;
  if (q < 1e-14) t = 1.0;
  if (fq < 1e-14 && q < 1e-14) return r;
  r.alpha = t > 0.0 ? Vec(p.dir * std::sqrt(t / fq)) : Vec(Vec::Zero(p.dir.size()));
  r.y = t < 1.0 ? p.y_sign * std::sqrt((1.0 - t) / q) : 0.0;
  r.feasible = true;
  return r;
}

}  // namespace

OperatorNormEstimate estimate_Tbar_norm(const KnowledgeSpace& space, double rho,
                                        const SamplingConfig& cfg) {
  const int m = space.basis_size();
  OperatorNormEstimate est;
  est.samples = cfg.samples;
  est.refinement_iters = cfg.refinement_iters;
  est.seed = cfg.seed;

  std::vector<EiPoint> pool;
  pool.reserve(cfg.samples);
  for (int i = 0; i < cfg.samples; ++i) {
    SplitMix64 rng = SplitMix64::stream(cfg.seed, static_cast<uint64_t>(i));
    EiPoint p;
    p.dir = Vec(m);
    for (int j = 0; j < m; ++j) p.dir(j) = rng.normal();
    if (p.dir.norm() > 0) p.dir.normalize();
    p.x = Vec(space.domain.dim());
    for (int d = 0; d < space.domain.dim(); ++d)
      p.x(d) = rng.uniform(space.domain.lower(d), space.domain.upper(d));
    p.t = cfg.fixed_mix >= 0.0 ? cfg.fixed_mix : rng.uniform();
    p.y_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    pool.push_back(p);
  }

  auto value_of = [&](const EiPoint& p) {
    EiRealized r = realize(space, p);
    if (!r.feasible) return -1.0;
    return agent_phi(space, rho, r.alpha, r.x, r.y);
  };

  std::vector<std::pair<double, size_t>> ranked;
  bool any_feasible = false;
  for (size_t i = 0; i < pool.size(); ++i) {
    double v = value_of(pool[i]);
    if (v >= 0.0) any_feasible = true;
    ranked.emplace_back(v, i);
  }
  if (!any_feasible)
    throw std::runtime_error("E set is empty: the kernel vanishes at every sampled point");
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double best = ranked.front().first;
  EiPoint best_point = pool[ranked.front().second];

  // coordinate ascent on the raw parameters of the top candidates
  int top = std::min<int>(cfg.refine_top, static_cast<int>(ranked.size()));
  for (int c = 0; c < top; ++c) {
    EiPoint p = pool[ranked[c].second];
    double v = ranked[c].first;
    double step = 0.25;
    for (int it = 0; it < cfg.refinement_iters; ++it) {
      for (int coord = 0; coord < m + space.domain.dim() + 2; ++coord) {
        for (double sgn : {1.0, -1.0}) {
          EiPoint q = p;
          if (coord < m) {
            q.dir(coord) += sgn * step;
            if (q.dir.norm() > 0) q.dir.normalize();
          } else if (coord < m + space.domain.dim()) {
            int d = coord - m;
            double w = space.domain.upper(d) - space.domain.lower(d);
            q.x(d) = std::clamp(q.x(d) + sgn * step * w, space.domain.lower(d),
                                space.domain.upper(d));
          } else if (coord == m + space.domain.dim()) {
            if (cfg.fixed_mix >= 0.0) continue;
            q.t = std::clamp(q.t + sgn * step, 0.0, 1.0);
          } else {
            if (sgn < 0) continue;
            q.y_sign = -q.y_sign;
          }
          double qv = value_of(q);
          if (qv > v) {
            v = qv;
            p = q;
          }
        }
      }
      step *= 0.6;
    }
    if (v > best) {
      best = v;
      best_point = p;
    }
  }

  EiRealized r = realize(space, best_point);
  est.value = std::sqrt(std::max(best, 0.0));
  est.argmax_witness.alpha = r.alpha;
  est.argmax_witness.x = r.x;
  est.argmax_witness.y = r.y;
  return est;
}

}  // namespace maea

#include "maea/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "maea/rng.hpp"
#include "maea/serialize.hpp"

namespace maea {

namespace {

struct MultiSample {
  Vec a1, a2;
  Vec x1, x2;
  double y1 = 0.0, y2 = 0.0;
};

MultiSample draw_multi(const FusionSpace& fusion, SplitMix64& rng) {
  const int m = fusion.m();
  MultiSample s;
  auto domain_point = [&](const DomainBox& dom) {
    Vec x(dom.dim());
    for (int d = 0; d < dom.dim(); ++d) x(d) = rng.uniform(dom.lower(d), dom.upper(d));
    return x;
  };
  s.x1 = domain_point(fusion.space1.domain);
  s.x2 = domain_point(fusion.space2.domain);
  Vec d1(m), d2(m);
  for (int i = 0; i < m; ++i) d1(i) = rng.normal();
  for (int i = 0; i < m; ++i) d2(i) = rng.normal();
  double w[4], tot = 0.0;
  for (double& wi : w) {
    wi = -std::log(std::max(rng.uniform(), 1e-300));
    tot += wi;
  }
  for (double& wi : w) wi /= tot;
  double q1 = quad_form(d1, fusion.space1.gram_local);
  double q2 = quad_form(d2, fusion.space2.gram_local);
  Vec k1 = kernel_section_at(fusion.space1, s.x1);
  Vec k2 = kernel_section_at(fusion.space2, s.x2);
  double p1 = quad_form(k1, fusion.space1.gram_local);
  double p2 = quad_form(k2, fusion.space2.gram_local);
  s.a1 = q1 > 1e-14 ? Vec(d1 * std::sqrt(w[0] / q1)) : Vec(Vec::Zero(m));
  s.y1 = p1 > 1e-14 ? std::sqrt(w[1] / p1) : 0.0;
  s.a2 = q2 > 1e-14 ? Vec(d2 * std::sqrt(w[2] / q2)) : Vec(Vec::Zero(m));
  s.y2 = p2 > 1e-14 ? std::sqrt(w[3] / p2) : 0.0;
  return s;
}

}  // namespace

OperatorNormEstimate estimate_multiagent_norm(const FusionSpace& fusion, double rho1, double rho2,
                                              const SamplingConfig& cfg, double tbar_norm_1,
                                              double tbar_norm_2, int* chain_violations) {
  OperatorNormEstimate est;
  est.samples = cfg.samples;
  est.seed = cfg.seed;
  double best = 0.0;
  if (chain_violations) *chain_violations = 0;
  const double chain_slack = 1e-9;
  for (int i = 0; i < cfg.samples; ++i) {
    SplitMix64 rng = SplitMix64::stream(cfg.seed, static_cast<uint64_t>(i));
    MultiSample s = draw_multi(fusion, rng);
    double m1 = quad_form(s.a1, fusion.space1.gram_local) +
                s.y1 * s.y1 * quad_form(kernel_section_at(fusion.space1, s.x1),
                                        fusion.space1.gram_local);
    double m2 = quad_form(s.a2, fusion.space2.gram_local) +
                s.y2 * s.y2 * quad_form(kernel_section_at(fusion.space2, s.x2),
                                        fusion.space2.gram_local);
    double mass = m1 + m2;
    if (mass < 1e-300) continue;
    double scale = 1.0 / std::sqrt(mass);
    RkhsFunction f1{SpaceTag::agent1, s.a1 * scale, std::nullopt};
    RkhsFunction f2{SpaceTag::agent2, s.a2 * scale, std::nullopt};
    RkhsFunction o1 = local_update(fusion.space1, f1, s.x1, s.y1 * scale, rho1);
    RkhsFunction o2 = local_update(fusion.space2, f2, s.x2, s.y2 * scale, rho2);
    RkhsFunction u1 = upload(fusion, o1);
    RkhsFunction u2 = upload(fusion, o2);
    double value = quad_form(u1.coefficients, fusion.gram_full) +
                   quad_form(u2.coefficients, fusion.gram_full);
    best = std::max(best, value);
    if (chain_violations && tbar_norm_1 > 0.0 && tbar_norm_2 > 0.0) {
      // submultiplicativity chain, first powers; upload norms bounded by 1
      double rhs = tbar_norm_1 * (m1 * scale * scale) + tbar_norm_2 * (m2 * scale * scale);
      if (value > rhs + chain_slack) ++(*chain_violations);
    }
  }
  est.value = std::sqrt(best);
  return est;
}

std::vector<double> decade_grid(int decades) {
  if (decades < 1) throw std::invalid_argument("grid needs at least one decade");
  std::vector<double> grid;
  for (int d = 0; d <= decades; ++d) grid.push_back(std::pow(10.0, d));
  return grid;
}

SweepResult norm_sweep(const FusionSpace& fusion, SweepTarget target,
                       const std::vector<double>& rho_grid, const SamplingConfig& cfg) {
  if (rho_grid.size() < 2) throw std::invalid_argument("sweep grid too small");
  for (size_t i = 1; i < rho_grid.size(); ++i)
    if (!(rho_grid[i] > rho_grid[i - 1]))
      throw std::invalid_argument("sweep grid must be strictly increasing");

  SweepResult sweep;
  sweep.target = target;
  sweep.rho_values = rho_grid;
  sweep.target_value = 1.0;

  for (size_t g = 0; g < rho_grid.size(); ++g) {
    double rho = rho_grid[g];
    SamplingConfig point_cfg = cfg;
    point_cfg.seed = cfg.seed ^ (0xd1a6ULL + static_cast<uint64_t>(g) * 0x9e3779b9ULL);
    switch (target) {
      case SweepTarget::agent1:
        sweep.norm_estimates.push_back(estimate_Tbar_norm(fusion.space1, rho, point_cfg));
        break;
      case SweepTarget::agent2:
        sweep.norm_estimates.push_back(estimate_Tbar_norm(fusion.space2, rho, point_cfg));
        break;
      case SweepTarget::multiagent: {
        SamplingConfig agent_cfg = point_cfg;
        agent_cfg.seed ^= 0x77aaULL;
        double t1 = estimate_Tbar_norm(fusion.space1, rho, agent_cfg).value;
        agent_cfg.seed ^= 0x88bbULL;
        double t2 = estimate_Tbar_norm(fusion.space2, rho, agent_cfg).value;
        int violations = 0;
        sweep.norm_estimates.push_back(
            estimate_multiagent_norm(fusion, rho, rho, point_cfg, t1, t2, &violations));
        sweep.chain_violations.push_back(violations);
        break;
      }
      case SweepTarget::fusion: {
        FusionNormConfig fcfg;
        fcfg.sampling = point_cfg;
        sweep.norm_estimates.push_back(estimate_T_norm(fusion, rho, fcfg));
        break;
      }
    }
  }
  sweep.limit_gap = std::abs(sweep.norm_estimates.back().value - sweep.target_value);
  return sweep;
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "rho,estimate,samples,limit_gap\n";
  for (size_t i = 0; i < sweep.rho_values.size(); ++i) {
    double gap = std::abs(sweep.norm_estimates[i].value - sweep.target_value);
    out << format_g17(sweep.rho_values[i]) << "," << format_g17(sweep.norm_estimates[i].value)
        << "," << sweep.norm_estimates[i].samples << "," << format_g17(gap) << "\n";
  }
}

void write_sweep_plot_data(const std::string& path, const SweepResult& sweep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (size_t i = 0; i < sweep.rho_values.size(); ++i)
    out << format_g17(std::log10(sweep.rho_values[i])) << " "
        << format_g17(sweep.norm_estimates[i].value) << "\n";
}

PerturbationReport inverse_perturbation_test(int trials, int dimension, uint64_t seed) {
  if (dimension > 8) throw std::invalid_argument("dimension capped at 8");
  PerturbationReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    SplitMix64 rng = SplitMix64::stream(seed, static_cast<uint64_t>(t));
    Mat m(dimension, dimension);
    Mat minv;
    double minv_norm = 0.0;
    // redraw until comfortably invertible
    for (;;) {
      for (int i = 0; i < dimension; ++i)
        for (int j = 0; j < dimension; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
      Eigen::FullPivLU<Mat> lu(m);
      if (!lu.isInvertible()) continue;
      minv = lu.inverse();
      minv_norm = spectral_norm(minv);
      if (minv_norm < 1e3) break;
    }
    Mat delta(dimension, dimension);
    for (int i = 0; i < dimension; ++i)
      for (int j = 0; j < dimension; ++j) delta(i, j) = rng.uniform(-1.0, 1.0);
    double dn = spectral_norm(delta);
    if (dn == 0.0) continue;
    double radius = rng.uniform(0.05, 0.95) / (2.0 * minv_norm);
    delta *= radius / dn;
    Mat n = m - delta;
    Mat ninv = Eigen::FullPivLU<Mat>(n).inverse();
    double lhs = spectral_norm(ninv - minv);
    double rhs = 2.0 * minv_norm * minv_norm * spectral_norm(Mat(m - n));
    rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
    if (lhs > rhs + 1e-10) ++rep.violations;
  }
  return rep;
}

ConvergenceReport uniform_convergence_test(const FusionSpace& fusion, ConvergenceKind kind,
                                           const std::vector<double>& rho_grid, int sample_count,
                                           uint64_t seed, double condition_cap) {
  ConvergenceReport rep;
  rep.kind = kind;
  rep.rho_values = rho_grid;

  if (kind == ConvergenceKind::agent_phi) {
    const KnowledgeSpace& space = fusion.space1;
    std::vector<double> sups;
    for (double rho : rho_grid) {
      double sup = 0.0;
      for (int i = 0; i < sample_count; ++i) {
        SplitMix64 rng = SplitMix64::stream(seed, static_cast<uint64_t>(i));
        Vec dir(space.basis_size());
        for (int k = 0; k < dir.size(); ++k) dir(k) = rng.normal();
        Vec x(space.domain.dim());
        for (int d = 0; d < space.domain.dim(); ++d)
          x(d) = rng.uniform(space.domain.lower(d), space.domain.upper(d));
        double t = rng.uniform();
        double q = quad_form(dir, space.gram_local);
        Vec k = kernel_section_at(space, x);
        double p = quad_form(k, space.gram_local);
        if (q < 1e-14) t = 0.0;
        if (p < 1e-14) t = 1.0;
        if (q < 1e-14 && p < 1e-14) continue;
        Vec alpha = t > 0 ? Vec(dir * std::sqrt(t / q)) : Vec(Vec::Zero(dir.size()));
        double y = t < 1 ? std::sqrt((1 - t) / p) : 0.0;
        double phi = agent_phi(space, rho, alpha, x, y);
        double limit = quad_form(alpha, space.gram_local);
        sup = std::max(sup, std::abs(phi - limit));
      }
      rep.sup_deviation.push_back(sup);
    }
    rep.final_deviation = rep.sup_deviation.back();
    return rep;
  }

  // fusion cases need the invertible part of gram_full
  SymEig gram_eig = sym_eig_clamped(fusion.gram_full, 1e-12);
  if (gram_eig.retained() == 0 || gram_eig.cond_retained() > condition_cap)
    throw std::runtime_error(
        "gram_full condition number exceeds the cap; uniform-convergence test refused");

  auto points = sample_E(fusion, sample_count, seed);
  const int m = fusion.m();

  if (kind == ConvergenceKind::phi1) {
    // per-sample deviation from K^T [alpha-blocks], Euclidean; the displayed
    // inequality is an exact pointwise monotone statement in rho
    std::vector<std::vector<double>> per_sample(points.size());
    for (double rho : rho_grid) {
      double sup = 0.0;
      for (size_t i = 0; i < points.size(); ++i) {
        Vec stacked(2 * m);
        stacked << points[i].first, points[i].second;
        Vec y(2 * m);
        y.head(m) = reconstruct_targets(fusion.gram_block_1, points[i].first, rho) / rho;
        y.tail(m) = reconstruct_targets(fusion.gram_block_2, points[i].second, rho) / rho;
        double dev = (fusion.gram_full * stacked - fusion.gram_full * y).norm();
        per_sample[i].push_back(dev);
        sup = std::max(sup, dev);
      }
      rep.sup_deviation.push_back(sup);
    }
    for (const auto& devs : per_sample)
      for (size_t g = 1; g < devs.size(); ++g)
        if (devs[g] > devs[g - 1]) ++rep.pointwise_violations;
    rep.final_deviation = rep.sup_deviation.back();
    return rep;
  }

  // phi2phi1: H-seminorm deviation of the fused coefficient map from identity
  for (double rho : rho_grid) {
    double sup = 0.0;
    for (const auto& [a1, a2] : points) {
      Vec beta = fusion_coefficient_map(fusion, gram_eig, a1, a2, rho);
      Vec stacked(2 * m);
      stacked << a1, a2;
      Vec diff = beta - stacked;
      sup = std::max(sup, gram_norm(diff, fusion.gram_full));
    }
    rep.sup_deviation.push_back(sup);
  }
  rep.final_deviation = rep.sup_deviation.back();
  return rep;
}

EquicontinuityReport equicontinuity_probe(const KnowledgeSpace& space,
                                          const std::vector<double>& rho_grid, int pairs,
                                          double delta, uint64_t seed) {
  EquicontinuityReport rep;
  rep.rho_values = rho_grid;
  const int m = space.basis_size();
  for (double rho : rho_grid) {
    double lip = 0.0;
    for (int i = 0; i < pairs; ++i) {
      SplitMix64 rng = SplitMix64::stream(seed, static_cast<uint64_t>(i));
      Vec dir(m);
      for (int k = 0; k < m; ++k) dir(k) = rng.normal();
      Vec x(space.domain.dim());
      for (int d = 0; d < space.domain.dim(); ++d)
        x(d) = rng.uniform(space.domain.lower(d), space.domain.upper(d));
      double t = rng.uniform();
      double q = quad_form(dir, space.gram_local);
      Vec k = kernel_section_at(space, x);
      double p = quad_form(k, space.gram_local);
      if (q < 1e-14 || p < 1e-14) continue;
      Vec alpha = dir * std::sqrt(t / q);
      double y = std::sqrt((1 - t) / p);

      // nearby point on E^i: perturb, renormalize the alpha part
      Vec dir_b = dir;
      dir_b(i % m) += delta;
      Vec x_b = x;
      x_b(0) = std::clamp(x_b(0) + delta * (space.domain.upper(0) - space.domain.lower(0)) * 0.1,
                          space.domain.lower(0), space.domain.upper(0));
      double qb = quad_form(dir_b, space.gram_local);
      Vec kb = kernel_section_at(space, x_b);
      double pb = quad_form(kb, space.gram_local);
      if (qb < 1e-14 || pb < 1e-14) continue;
      Vec alpha_b = dir_b * std::sqrt(t / qb);
      double y_b = std::sqrt((1 - t) / pb);

      double dist = std::sqrt((alpha - alpha_b).squaredNorm() + (x - x_b).squaredNorm() +
                              (y - y_b) * (y - y_b));
      if (dist < 1e-12) continue;
      double diff =
          std::abs(agent_phi(space, rho, alpha, x, y) - agent_phi(space, rho, alpha_b, x_b, y_b));
      lip = std::max(lip, diff / dist);
    }
    rep.lipschitz.push_back(lip);
  }
  return rep;
}

}  // namespace maea

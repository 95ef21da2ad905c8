#include "maea/maea3.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <stdexcept>

#include "maea/rng.hpp"

namespace maea {

DataSource make_vector_source(std::vector<DataPoint> agent1, std::vector<DataPoint> agent2) {
  auto a1 = std::make_shared<std::vector<DataPoint>>(std::move(agent1));
  auto a2 = std::make_shared<std::vector<DataPoint>>(std::move(agent2));
  return [a1, a2](int agent_id, int iteration) -> std::optional<DataPoint> {
    const auto& v = agent_id == 1 ? *a1 : *a2;
    if (iteration < 1 || iteration > static_cast<int>(v.size())) return std::nullopt;
    return v[iteration - 1];
  };
}

IterationResult run_iteration(const FusionSpace& fusion, const TransferOperators& ops,
                              const IterationState& state, const DataPoint& d1,
                              const DataPoint& d2, const RhoTriple& rho) {
  IterationResult r;
  r.f1 = local_update(fusion.space1, state.fbar_1, d1.x, d1.y, rho.rho1);
  r.f2 = local_update(fusion.space2, state.fbar_2, d2.x, d2.y, rho.rho2);
  r.uploaded_1 = upload(fusion, r.f1);
  r.uploaded_2 = upload(fusion, r.f2);
  r.targets = reconstruct_all(fusion, r.uploaded_1, r.uploaded_2, rho.rho1, rho.rho2);
  r.fused = fuse(fusion, r.targets, rho.rho);
  auto [g1, g2] = download(fusion, ops, r.fused);
  r.fbar_1 = std::move(g1);
  r.fbar_2 = std::move(g2);
  return r;
}

namespace {

double pair_norm(const FusionSpace& fusion, const Vec& c1, const Vec& c2) {
  return std::sqrt(std::max(0.0, quad_form(c1, fusion.space1.gram_local)) +
                   std::max(0.0, quad_form(c2, fusion.space2.gram_local)));
}

double psi_norm_sq(const KnowledgeSpace& space, const DataPoint& d) {
  Vec k = kernel_section_at(space, d.x);
  return d.y * d.y * quad_form(k, space.gram_local);
}

struct EbarSample {
  Vec f1, f2;
  DataPoint d1, d2;
};

// unit-mass point of the Ebar set: random mass split over the four components
EbarSample draw_ebar(const FusionSpace& fusion, SplitMix64& rng) {
  const int m = fusion.m();
  EbarSample s;
  auto domain_point = [&](const DomainBox& dom) {
    Vec x(dom.dim());
    for (int d = 0; d < dom.dim(); ++d) x(d) = rng.uniform(dom.lower(d), dom.upper(d));
    return x;
  };
  s.d1.x = domain_point(fusion.space1.domain);
  s.d2.x = domain_point(fusion.space2.domain);
  Vec dir1(m), dir2(m);
  for (int i = 0; i < m; ++i) dir1(i) = rng.normal();
  for (int i = 0; i < m; ++i) dir2(i) = rng.normal();
  double w[4];
  double tot = 0.0;
  for (double& wi : w) {
    wi = -std::log(std::max(rng.uniform(), 1e-300));
    tot += wi;
  }
  for (double& wi : w) wi /= tot;
  double q1 = quad_form(dir1, fusion.space1.gram_local);
  double q2 = quad_form(dir2, fusion.space2.gram_local);
  Vec k1 = kernel_section_at(fusion.space1, s.d1.x);
  Vec k2 = kernel_section_at(fusion.space2, s.d2.x);
  double p1 = quad_form(k1, fusion.space1.gram_local);
  double p2 = quad_form(k2, fusion.space2.gram_local);
  s.f1 = q1 > 1e-14 ? Vec(dir1 * std::sqrt(w[0] / q1)) : Vec(Vec::Zero(m));
  s.d1.y = p1 > 1e-14 ? std::sqrt(w[1] / p1) : 0.0;
  s.f2 = q2 > 1e-14 ? Vec(dir2 * std::sqrt(w[2] / q2)) : Vec(Vec::Zero(m));
  s.d2.y = p2 > 1e-14 ? std::sqrt(w[3] / p2) : 0.0;
  return s;
}

double ebar_mass(const FusionSpace& fusion, const EbarSample& s) {
  return quad_form(s.f1, fusion.space1.gram_local) + psi_norm_sq(fusion.space1, s.d1) +
         quad_form(s.f2, fusion.space2.gram_local) + psi_norm_sq(fusion.space2, s.d2);
}

}  // namespace

double estimate_iteration_norm(const FusionSpace& fusion, const TransferOperators& ops,
                               const RhoTriple& rho, const SamplingConfig& cfg,
                               const RealizedInput* realized) {
  auto chain_value = [&](const EbarSample& s) {
    IterationState st{RkhsFunction{SpaceTag::agent1, s.f1, std::nullopt},
                      RkhsFunction{SpaceTag::agent2, s.f2, std::nullopt}};
    IterationResult r = run_iteration(fusion, ops, st, s.d1, s.d2, rho);
    return pair_norm(fusion, r.fbar_1.coefficients, r.fbar_2.coefficients);
  };

  double best = 0.0;
  for (int i = 0; i < cfg.samples; ++i) {
    SplitMix64 rng = SplitMix64::stream(cfg.seed, static_cast<uint64_t>(i));
    EbarSample s = draw_ebar(fusion, rng);
    double mass = ebar_mass(fusion, s);
    if (mass < 1e-300) continue;
    double scale = 1.0 / std::sqrt(mass);
    s.f1 *= scale;
    s.f2 *= scale;
    s.d1.y *= scale;
    s.d2.y *= scale;
    best = std::max(best, chain_value(s));
  }
  if (realized) {
    EbarSample s{realized->f1, realized->f2, realized->d1, realized->d2};
    double mass = ebar_mass(fusion, s);
    if (mass > 1e-300) {
      double scale = 1.0 / std::sqrt(mass);
      s.f1 *= scale;
      s.f2 *= scale;
      s.d1.y *= scale;
      s.d2.y *= scale;
      best = std::max(best, chain_value(s));
    }
  }
  return best;
}

IterationTrace run(const FusionSpace& fusion, const TransferOperators& ops,
                   const AlgorithmConfig& cfg, const DataSource& source,
                   const RkhsFunction& f0_1, const RkhsFunction& f0_2) {
  if (!(cfg.epsilon >= 0.0) || cfg.k_max < 1)
    throw std::invalid_argument("config needs epsilon >= 0 and k_max >= 1");
  IterationTrace trace;
  trace.f0_1 = f0_1.coefficients;
  trace.f0_2 = f0_2.coefficients;
  IterationState state{f0_1, f0_2};

  // downloads for the stopping window, newest last
  std::deque<std::pair<Vec, Vec>> window;

  // trajectory-bound accumulators: prefix product of norm estimates and the
  // recursive data-term sum S_n = e_n (S_{n-1} + psi_n^2)
  double prefix = 1.0;
  double data_sum = 0.0;
  double bracket = 0.0;
  bool have_bracket = false;

  trace.stop_reason = StopReason::budget;
  trace.stop_iteration = 0;

  for (int n = 1; n <= cfg.max_iterations; ++n) {
    auto d1 = source(1, n);
    auto d2 = source(2, n);
    if (!d1 || !d2) {
      trace.stop_reason = StopReason::data_exhausted;
      trace.stop_iteration = n - 1;
      break;
    }
    RhoTriple rho{0, 0, 0};
    try {
      rho = RhoTriple{cfg.rho1.value(n), cfg.rho2.value(n), cfg.rho_fused.value(n)};
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(n) + ": " + e.what());
    }

    IterationRecord rec;
    rec.n = n;
    rec.rho1 = rho.rho1;
    rec.rho2 = rho.rho2;
    rec.rho = rho.rho;
    rec.psi1 = std::sqrt(psi_norm_sq(fusion.space1, *d1));
    rec.psi2 = std::sqrt(psi_norm_sq(fusion.space2, *d2));

    double est = std::numeric_limits<double>::quiet_NaN();
    if (cfg.norm_mode == NormMode::per_iteration) {
      RealizedInput realized{state.fbar_1.coefficients, state.fbar_2.coefficients, *d1, *d2};
      SamplingConfig scfg;
      scfg.samples = cfg.norm_samples;
      scfg.refinement_iters = cfg.norm_refine_iters;
      scfg.seed = cfg.seed ^ (0x5bf0'3635ULL + static_cast<uint64_t>(n) * 0x9e37ULL);
      est = estimate_iteration_norm(fusion, ops, rho, scfg, &realized);
      rec.norm_T = est;
    } else if (cfg.norm_mode == NormMode::per_stage) {
      SamplingConfig scfg;
      scfg.samples = cfg.norm_samples;
      scfg.refinement_iters = cfg.norm_refine_iters;
      scfg.seed = cfg.seed ^ (0xa5a5ULL + static_cast<uint64_t>(n) * 0x9e37ULL);
      double t1 = estimate_Tbar_norm(fusion.space1, rho.rho1, scfg).value;
      scfg.seed ^= 0x1111ULL;
      double t2 = estimate_Tbar_norm(fusion.space2, rho.rho2, scfg).value;
      rec.norm_Tbar = std::max(t1, t2);
      FusionNormConfig fcfg;
      fcfg.sampling = scfg;
      fcfg.sampling.seed ^= 0x2222ULL;
      rec.norm_Tfuse = estimate_T_norm(fusion, rho.rho, fcfg).value;
      rec.norm_That = 1.0;
      est = rec.norm_Tbar * rec.norm_Tfuse * rec.norm_That;
      rec.norm_T = est;
    }

    IterationResult result;
    try {
      result = run_iteration(fusion, ops, state, *d1, *d2, rho);
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(n) + ": " + e.what());
    }
    state.fbar_1 = result.fbar_1;
    state.fbar_2 = result.fbar_2;
    trace.final_fbar_1 = result.fbar_1.coefficients;
    trace.final_fbar_2 = result.fbar_2.coefficients;

    rec.norm_f1 = rkhs_norm(fusion.space1, result.f1);
    rec.norm_f2 = rkhs_norm(fusion.space2, result.f2);
    rec.norm_fused = rkhs_norm(fusion, result.fused);
    rec.norm_down1 = rkhs_norm(fusion.space1, result.fbar_1);
    rec.norm_down2 = rkhs_norm(fusion.space2, result.fbar_2);

    if (cfg.bound_check && !std::isnan(est)) {
      double psi_sq = rec.psi1 * rec.psi1 + rec.psi2 * rec.psi2;
      if (!have_bracket) {
        bracket = quad_form(f0_1.coefficients, fusion.space1.gram_local) +
                  quad_form(f0_2.coefficients, fusion.space2.gram_local) + psi_sq;
        have_bracket = true;
      } else {
        data_sum = est * (data_sum + psi_sq);
      }
      prefix *= est;
      rec.bound_rhs = prefix * bracket + data_sum;
    }

    window.emplace_back(result.fbar_1.coefficients, result.fbar_2.coefficients);
    if (static_cast<int>(window.size()) > cfg.k_max + 1) window.pop_front();

    if (cfg.snapshot_stride > 0 && (n % cfg.snapshot_stride == 0))
      trace.snapshots.emplace(n, std::make_pair(result.fbar_1.coefficients,
                                                result.fbar_2.coefficients));

    // stopping: sum over the window of distances to its oldest entry
    if (static_cast<int>(window.size()) == cfg.k_max + 1) {
      double s = 0.0;
      const auto& base = window.front();
      for (const auto& h : window) {
        s += gram_norm(h.first - base.first, fusion.space1.gram_local) +
             gram_norm(h.second - base.second, fusion.space2.gram_local);
      }
      rec.stop_metric = s;
      trace.records.push_back(rec);
      if (s < cfg.epsilon) {
        trace.stop_reason = StopReason::criterion;
        trace.stop_iteration = n;
        return trace;
      }
    } else {
      trace.records.push_back(rec);
    }
  }
  if (trace.stop_reason == StopReason::budget) trace.stop_iteration = trace.iterations();
  return trace;
}

ValiditySequenceReport validate_sequence(const FusionSpace& fusion, const RkhsFunction& f0_1,
                                         const RkhsFunction& f0_2,
                                         const std::vector<DataPoint>& data1,
                                         const std::vector<DataPoint>& data2, int horizon) {
  if (horizon < 10) throw std::invalid_argument("horizon too short (need >= 10)");
  if (static_cast<int>(data1.size()) < horizon || static_cast<int>(data2.size()) < horizon)
    throw std::invalid_argument("data prefix shorter than the horizon");

  double denom = quad_form(f0_1.coefficients, fusion.space1.gram_local) +
                 quad_form(f0_2.coefficients, fusion.space2.gram_local) +
                 psi_norm_sq(fusion.space1, data1[0]) + psi_norm_sq(fusion.space2, data2[0]);
  if (denom <= 1e-300)
    throw std::runtime_error("denominator vanishes: zero initial estimates and first datum");

  ValiditySequenceReport rep;
  std::vector<double> terms;
  double sum = 0.0;
  for (int n = 2; n <= horizon; ++n) {
    double t = (psi_norm_sq(fusion.space1, data1[n - 1]) +
                psi_norm_sq(fusion.space2, data2[n - 1])) /
               denom;
    terms.push_back(t);
    sum += t;
    rep.partial_sums.push_back(sum);
  }

  const size_t w = std::min(terms.size(), static_cast<size_t>(std::max<int>(
                                              5, static_cast<int>(terms.size()) / 4)));
  const size_t start = terms.size() - w;
  double last = terms.back();
  double tiny = 1e-15 * (1.0 + sum);

  bool all_tiny = true;
  for (size_t i = start; i < terms.size(); ++i)
    if (terms[i] > tiny) all_tiny = false;
  if (all_tiny) {
    rep.verdict = ValidityVerdict::valid_bounded;
    rep.tail_ratio = 0.0;
    rep.c_estimate = sum;
    return rep;
  }

  // geometric mean of the successive-term ratios over the window; a single
  // ratio is too noisy when the sampling locations move between terms
  double log_sum = 0.0;
  int ratio_count = 0;
  for (size_t i = start; i + 1 < terms.size(); ++i) {
    if (terms[i] <= tiny || terms[i + 1] <= tiny) continue;
    log_sum += std::log(terms[i + 1] / terms[i]);
    ++ratio_count;
  }
  if (ratio_count == 0) {
    rep.verdict = ValidityVerdict::inconclusive;
    return rep;
  }
  double ratio = std::exp(log_sum / ratio_count);
  rep.tail_ratio = ratio;

  // persistence: the mean of the last window against the mean of an
  // equal-length leading window
  double first_mean = 0.0, last_mean = 0.0;
  for (size_t i = 0; i < w; ++i) first_mean += terms[i];
  for (size_t i = start; i < terms.size(); ++i) last_mean += terms[i];
  first_mean /= static_cast<double>(w);
  last_mean /= static_cast<double>(terms.size() - start);
  double shrinkage = first_mean > 0.0 ? last_mean / first_mean : 1.0;

  if (shrinkage >= 0.5) {
    rep.verdict = ValidityVerdict::diverging;
  } else if (ratio <= 0.999) {
    rep.verdict = ValidityVerdict::valid_bounded;
    rep.c_estimate = sum + last * ratio / (1.0 - ratio);
  } else {
    rep.verdict = ValidityVerdict::inconclusive;
  }
  return rep;
}

SubsequenceSelection select_bounded_subsequence(const std::vector<double>& norms) {
  if (norms.empty()) throw std::invalid_argument("norms list is empty");
  for (double a : norms)
    if (a < 0.0) throw std::invalid_argument("norms must be nonnegative");

  SubsequenceSelection sel;
  // c5: median of the last quartile
  int q = std::max<int>(1, static_cast<int>(norms.size()) / 4);
  std::vector<double> tail(norms.end() - q, norms.end());
  std::sort(tail.begin(), tail.end());
  sel.c5 = q % 2 == 1 ? tail[q / 2] : 0.5 * (tail[q / 2 - 1] + tail[q / 2]);
  if (sel.c5 <= 1e-9) {
    sel.pathological = true;
    return sel;
  }

  int level = 1;
  double envelope = 0.5;
  std::vector<double> chosen;
  for (size_t n = 0; n < norms.size(); ++n) {
    double normalized = norms[n] / sel.c5;
    if (std::abs(normalized - 1.0) <= envelope) {
      sel.indices.push_back(static_cast<int>(n));
      chosen.push_back(normalized);
      ++level;
      envelope = std::pow(0.5, level);
    }
  }
  if (sel.indices.empty()) return sel;

  double prefix = 1.0, max_prefix = 0.0, min_prefix_before = 1.0;
  double max_window = 0.0;
  for (double a : chosen) {
    max_window = std::max(max_window, prefix * a / min_prefix_before);
    prefix *= a;
    max_prefix = std::max(max_prefix, prefix);
    min_prefix_before = std::min(min_prefix_before, prefix);
  }
  sel.c_M1 = max_prefix;
  sel.c_M2 = max_window;
  return sel;
}

BoundCheckResult bound_check(const FusionSpace& fusion, const IterationTrace& trace,
                             double tolerance) {
  BoundCheckResult out;
  std::vector<double> ests;
  for (const auto& r : trace.records) {
    if (std::isnan(r.norm_T))
      throw std::runtime_error(
          "trace carries no norm estimates; rerun with norm estimation enabled");
    ests.push_back(r.norm_T);
  }
  if (trace.records.empty()) return out;

  double bracket = quad_form(trace.f0_1, fusion.space1.gram_local) +
                   quad_form(trace.f0_2, fusion.space2.gram_local) +
                   trace.records[0].psi1 * trace.records[0].psi1 +
                   trace.records[0].psi2 * trace.records[0].psi2;
  double prefix = 1.0, data_sum = 0.0;
  for (size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (i > 0) data_sum = ests[i] * (data_sum + r.psi1 * r.psi1 + r.psi2 * r.psi2);
    prefix *= ests[i];
    double rhs = prefix * bracket + data_sum;
    double lhs = std::sqrt(r.norm_down1 * r.norm_down1 + r.norm_down2 * r.norm_down2);
    bool ok = lhs <= rhs * (1.0 + tolerance);
    out.rhs.push_back(rhs);
    out.ok.push_back(ok);
    if (!ok) ++out.violations;
  }

  SubsequenceSelection sel = select_bounded_subsequence(ests);
  if (!sel.pathological && !sel.indices.empty()) {
    // uniform constant: (c_M1 + c_M2 * c_{f0}) * initial bracket, c_{f0} from
    // the realized psi series
    double c_f0 = 0.0;
    for (size_t i = 1; i < trace.records.size(); ++i)
      c_f0 += (trace.records[i].psi1 * trace.records[i].psi1 +
               trace.records[i].psi2 * trace.records[i].psi2) /
              bracket;
    out.uniform_constant = (sel.c_M1 + sel.c_M2 * c_f0) * bracket;
  }
  return out;
}

ConsistencyProbeResult consistency_probe(const FusionSpace& fusion, const IterationTrace& trace,
                                         int window, double epsilon) {
  if (trace.snapshots.empty()) throw std::invalid_argument("trace holds no snapshots");
  std::vector<int> snap_ns;
  for (const auto& [n, _] : trace.snapshots) snap_ns.push_back(n);

  // prefer the envelope selection on norm estimates; uniform stride otherwise
  std::vector<int> subsequence;
  bool have_ests = !trace.records.empty() && !std::isnan(trace.records[0].norm_T);
  if (have_ests) {
    std::vector<double> ests;
    for (const auto& r : trace.records) ests.push_back(std::isnan(r.norm_T) ? 0.0 : r.norm_T);
    SubsequenceSelection sel = select_bounded_subsequence(ests);
    if (!sel.pathological)
      for (int idx : sel.indices) {
        int n = trace.records[idx].n;
        if (trace.snapshots.count(n)) subsequence.push_back(n);
      }
  }
  if (subsequence.size() < static_cast<size_t>(window)) {
    subsequence.clear();
    int stride = std::max<int>(1, static_cast<int>(snap_ns.size()) / (2 * window));
    for (size_t i = 0; i < snap_ns.size(); i += stride) subsequence.push_back(snap_ns[i]);
  }
  if (static_cast<int>(subsequence.size()) < window)
    throw std::invalid_argument("window longer than the available subsequence");

  std::vector<int> tail(subsequence.end() - window, subsequence.end());
  double diameter = 0.0;
  for (size_t i = 0; i < tail.size(); ++i)
    for (size_t j = i + 1; j < tail.size(); ++j) {
      const auto& a = trace.snapshots.at(tail[i]);
      const auto& b = trace.snapshots.at(tail[j]);
      double d = std::sqrt(
          std::max(0.0, quad_form(Vec(a.first - b.first), fusion.space1.gram_local)) +
          std::max(0.0, quad_form(Vec(a.second - b.second), fusion.space2.gram_local)));
      diameter = std::max(diameter, d);
    }
  ConsistencyProbeResult out;
  out.diameter = diameter;
  out.subsequence = tail;
  out.verdict = diameter <= epsilon ? ProbeVerdict::cauchy : ProbeVerdict::not_yet;
  return out;
}

}  // namespace maea

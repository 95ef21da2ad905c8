#include "maea/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "maea/rng.hpp"
#include "maea/serialize.hpp"

namespace maea {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

double num(const std::string& s, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    fail(line, "malformed number '" + s + "'");
  }
}

FeatureDescriptor parse_feature(const std::vector<std::string>& toks, int line) {
  if (toks.empty()) fail(line, "empty feature");
  if (toks[0] == "monomial") {
    if (toks.size() != 2) fail(line, "monomial takes one degree");
    return FeatureDescriptor::make_monomial(static_cast<int>(num(toks[1], line)));
  }
  if (toks[0] == "gaussian") {
    if (toks.size() < 3) fail(line, "gaussian takes center components and a width");
    Vec c(toks.size() - 2);
    for (size_t i = 1; i + 1 < toks.size(); ++i) c(i - 1) = num(toks[i], line);
    return FeatureDescriptor::make_gaussian(c, num(toks.back(), line));
  }
  if (toks[0] == "sinusoid") {
    if (toks.size() != 3) fail(line, "sinusoid takes frequency and phase");
    return FeatureDescriptor::make_sinusoid(num(toks[1], line), num(toks[2], line));
  }
  fail(line, "unknown feature kind '" + toks[0] + "'");
}

RhoSchedule parse_schedule(const std::vector<std::string>& toks, int line) {
  if (toks.empty()) fail(line, "empty schedule");
  if (toks[0] == "power") {
    if (toks.size() != 3) fail(line, "power schedule takes rho0 and exponent");
    return RhoSchedule::power(num(toks[1], line), num(toks[2], line));
  }
  if (toks[0] == "geometric") {
    if (toks.size() != 3) fail(line, "geometric schedule takes rho0 and ratio");
    return RhoSchedule::geometric(num(toks[1], line), num(toks[2], line));
  }
  if (toks[0] == "explicit") {
    std::vector<double> vals;
    for (size_t i = 1; i < toks.size(); ++i) vals.push_back(num(toks[i], line));
    return RhoSchedule::explicit_values(vals);
  }
  fail(line, "unknown schedule kind '" + toks[0] + "'");
}

Vec parse_vector(const std::vector<std::string>& toks, int line) {
  Vec v(toks.size());
  for (size_t i = 0; i < toks.size(); ++i) v(i) = num(toks[i], line);
  return v;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  Vec lower, upper;
  int dim = 1;
  bool saw_lower = false, saw_upper = false;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    std::string key;
    {
      std::istringstream ks(line.substr(0, eq));
      ks >> key;
      std::string extra;
      if (ks >> extra) fail(line_no, "malformed key '" + line.substr(0, eq) + "'");
    }
    auto toks = split_ws(line.substr(eq + 1));
    if (toks.empty()) fail(line_no, "key '" + key + "' has no value");

    if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(std::stoull(toks[0]));
    } else if (key == "out_dir") {
      cfg.out_dir = toks[0];
    } else if (key == "domain.dim") {
      dim = static_cast<int>(num(toks[0], line_no));
    } else if (key == "domain.lower") {
      lower = parse_vector(toks, line_no);
      saw_lower = true;
    } else if (key == "domain.upper") {
      upper = parse_vector(toks, line_no);
      saw_upper = true;
    } else if (key == "agent1.feature") {
      cfg.features1.push_back(parse_feature(toks, line_no));
    } else if (key == "agent2.feature") {
      cfg.features2.push_back(parse_feature(toks, line_no));
    } else if (key == "selection.candidates") {
      cfg.selection.candidates = static_cast<int>(num(toks[0], line_no));
    } else if (key == "selection.max_attempts") {
      cfg.selection.max_attempts = static_cast<int>(num(toks[0], line_no));
    } else if (key == "selection.condition_cap") {
      cfg.selection.condition_cap = num(toks[0], line_no);
    } else if (key == "rho1") {
      cfg.algorithm.rho1 = parse_schedule(toks, line_no);
    } else if (key == "rho2") {
      cfg.algorithm.rho2 = parse_schedule(toks, line_no);
    } else if (key == "rho") {
      cfg.algorithm.rho_fused = parse_schedule(toks, line_no);
    } else if (key == "k_max") {
      cfg.algorithm.k_max = static_cast<int>(num(toks[0], line_no));
    } else if (key == "epsilon") {
      cfg.algorithm.epsilon = num(toks[0], line_no);
    } else if (key == "max_iterations") {
      cfg.algorithm.max_iterations = static_cast<int>(num(toks[0], line_no));
    } else if (key == "snapshot_stride") {
      cfg.algorithm.snapshot_stride = static_cast<int>(num(toks[0], line_no));
    } else if (key == "bound_check") {
      cfg.algorithm.bound_check = toks[0] == "true" || toks[0] == "1";
    } else if (key == "norm_mode") {
      if (toks[0] == "off")
        cfg.algorithm.norm_mode = NormMode::off;
      else if (toks[0] == "per_stage")
        cfg.algorithm.norm_mode = NormMode::per_stage;
      else if (toks[0] == "per_iteration")
        cfg.algorithm.norm_mode = NormMode::per_iteration;
      else
        fail(line_no, "unknown norm_mode '" + toks[0] + "'");
    } else if (key == "norm_samples") {
      cfg.algorithm.norm_samples = static_cast<int>(num(toks[0], line_no));
    } else if (key == "refine_iters") {
      cfg.algorithm.norm_refine_iters = static_cast<int>(num(toks[0], line_no));
    } else if (key == "truth") {
      cfg.truth_coefficients = parse_vector(toks, line_no);
    } else if (key == "noise") {
      if (toks[0] == "none") {
        cfg.noise = NoiseKind::none;
      } else if (toks[0] == "gaussian" && toks.size() == 2) {
        cfg.noise = NoiseKind::gaussian;
        cfg.noise_param = num(toks[1], line_no);
      } else if (toks[0] == "uniform" && toks.size() == 2) {
        cfg.noise = NoiseKind::uniform;
        cfg.noise_param = num(toks[1], line_no);
      } else {
        fail(line_no, "noise must be none, 'gaussian s' or 'uniform a'");
      }
    } else if (key == "decay") {
      if (toks[0] == "none") {
        cfg.decay = DecayKind::none;
      } else if (toks[0] == "geometric" && toks.size() == 2) {
        cfg.decay = DecayKind::geometric;
        cfg.decay_rate = num(toks[1], line_no);
        if (!(cfg.decay_rate > 0.0 && cfg.decay_rate < 1.0))
          fail(line_no, "geometric decay rate must lie in (0,1)");
      } else {
        fail(line_no, "decay must be none or 'geometric r'");
      }
    } else if (key == "amplitude") {
      cfg.amplitude = num(toks[0], line_no);
    } else if (key == "initial1") {
      cfg.initial1 = parse_vector(toks, line_no);
    } else if (key == "initial2") {
      cfg.initial2 = parse_vector(toks, line_no);
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }

  if (!saw_lower || !saw_upper) throw std::runtime_error("config: domain bounds are required");
  if (lower.size() != dim || upper.size() != dim)
    throw std::runtime_error("config: domain bounds do not match domain.dim");
  cfg.domain = DomainBox(lower, upper);
  if (cfg.features1.empty() || cfg.features2.empty())
    throw std::runtime_error("config: both agents need at least one feature");
  cfg.algorithm.seed = cfg.seed;
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  Experiment exp;
  exp.config = cfg;
  KnowledgeSpace s1 = build_knowledge_space(1, cfg.features1, cfg.domain);
  KnowledgeSpace s2 = build_knowledge_space(2, cfg.features2, cfg.domain);
  exp.fusion = build_fusion_space(s1, s2, cfg.selection);
  exp.ops = build_transfer_operators(exp.fusion);
  return exp;
}

namespace {

double truth_value(const ExperimentConfig& cfg, const Vec& x) {
  if (cfg.truth_coefficients.size() == 0) return 1.0;
  double v = 0.0;
  int idx = 0;
  for (const auto& f : cfg.features1) {
    if (idx >= cfg.truth_coefficients.size()) break;
    v += cfg.truth_coefficients(idx++) * eval_feature(f, x);
  }
  for (const auto& f : cfg.features2) {
    if (idx >= cfg.truth_coefficients.size()) break;
    v += cfg.truth_coefficients(idx++) * eval_feature(f, x);
  }
  return v;
}

DataPoint generate_point(const Experiment& exp, int agent_id, int n) {
  const ExperimentConfig& cfg = exp.config;
  SplitMix64 rng = SplitMix64::stream(
      cfg.seed ^ (agent_id == 1 ? 0x0badd00dULL : 0xfeedf00dULL), static_cast<uint64_t>(n));
  DataPoint d;
  d.x = Vec(cfg.domain.dim());
  for (int k = 0; k < cfg.domain.dim(); ++k)
    d.x(k) = rng.uniform(cfg.domain.lower(k), cfg.domain.upper(k));
  double y = truth_value(cfg, d.x);
  switch (cfg.noise) {
    case NoiseKind::none:
      break;
    case NoiseKind::gaussian:
      y += cfg.noise_param * rng.normal();
      break;
    case NoiseKind::uniform:
      y += cfg.noise_param * rng.uniform(-1.0, 1.0);
      break;
  }
  double decay = cfg.decay == DecayKind::geometric
                     ? std::pow(cfg.decay_rate, static_cast<double>(n))
                     : 1.0;
  d.y = cfg.amplitude * decay * y;
  return d;
}

RkhsFunction initial_estimate(const Experiment& exp, int agent_id) {
  const Vec& given = agent_id == 1 ? exp.config.initial1 : exp.config.initial2;
  const KnowledgeSpace& space = agent_space(exp.fusion, agent_id);
  RkhsFunction f = RkhsFunction::zero(space.tag(), space.basis_size());
  if (given.size() > 0) {
    if (given.size() != space.basis_size())
      throw std::runtime_error("initial estimate length does not match basis count");
    f.coefficients = given;
  }
  return f;
}

}  // namespace

DataSource make_generator_source(const Experiment& exp) {
  const Experiment* e = &exp;
  return [e](int agent_id, int n) -> std::optional<DataPoint> {
    return generate_point(*e, agent_id, n);
  };
}

std::vector<DataPoint> generate_prefix(const Experiment& exp, int agent_id, int count) {
  std::vector<DataPoint> out;
  out.reserve(count);
  for (int n = 1; n <= count; ++n) out.push_back(generate_point(exp, agent_id, n));
  return out;
}

void write_trace_csv(const std::string& path, const IterationTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "n,rho1,rho2,rho,norm_f1,norm_f2,norm_fused,norm_down1,norm_down2,psi1,psi2,"
         "bound_rhs,stop_metric\n";
  for (const auto& r : trace.records) {
    out << r.n << "," << format_g17(r.rho1) << "," << format_g17(r.rho2) << ","
        << format_g17(r.rho) << "," << format_g17(r.norm_f1) << "," << format_g17(r.norm_f2)
        << "," << format_g17(r.norm_fused) << "," << format_g17(r.norm_down1) << ","
        << format_g17(r.norm_down2) << "," << format_g17(r.psi1) << "," << format_g17(r.psi2)
        << "," << format_g17(r.bound_rhs) << "," << format_g17(r.stop_metric) << "\n";
  }
}

namespace {

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::criterion:
      return "criterion";
    case StopReason::budget:
      return "budget";
    case StopReason::data_exhausted:
      return "data-exhausted";
  }
  return "?";
}

int usage_error(std::ostream& out, const std::string& msg) {
  out << "error: " << msg << "\n";
  return 2;
}

void apply_seed(ExperimentConfig& cfg, uint64_t seed) {
  cfg.seed = seed;
  cfg.algorithm.seed = seed;
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_dir_override,
            std::ostream& out, std::optional<uint64_t> seed_override) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const std::exception& e) {
    return usage_error(out, e.what());
  }
  if (seed_override) apply_seed(cfg, *seed_override);
  if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
  try {
    Experiment exp = prepare_experiment(cfg);
    RkhsFunction f0_1 = initial_estimate(exp, 1);
    RkhsFunction f0_2 = initial_estimate(exp, 2);
    IterationTrace trace =
        run(exp.fusion, exp.ops, cfg.algorithm, make_generator_source(exp), f0_1, f0_2);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    write_trace_csv((fs::path(cfg.out_dir) / "trace.csv").string(), trace);

    // final models from the last executed iteration's downloads
    if (trace.final_fbar_1.size() > 0) {
      RkhsFunction g1{SpaceTag::agent1, trace.final_fbar_1, std::nullopt};
      RkhsFunction g2{SpaceTag::agent2, trace.final_fbar_2, std::nullopt};
      write_text_file((fs::path(cfg.out_dir) / "model_fbar1.txt").string(),
                      model_to_text(exp.fusion.space1, g1));
      write_text_file((fs::path(cfg.out_dir) / "model_fbar2.txt").string(),
                      model_to_text(exp.fusion.space2, g2));
      RkhsFunction fused_sum = upload(exp.fusion, g1);
      fused_sum.coefficients += upload(exp.fusion, g2).coefficients;
      write_text_file((fs::path(cfg.out_dir) / "model_fused.txt").string(),
                      model_to_text(exp.fusion, fused_sum));
      // coefficient snapshots at the configured stride, one model file each
      for (const auto& [n, snap] : trace.snapshots) {
        RkhsFunction s1{SpaceTag::agent1, snap.first, std::nullopt};
        write_text_file(
            (fs::path(cfg.out_dir) / ("snapshot_" + std::to_string(n) + "_agent1.txt")).string(),
            model_to_text(exp.fusion.space1, s1));
        RkhsFunction s2{SpaceTag::agent2, snap.second, std::nullopt};
        write_text_file(
            (fs::path(cfg.out_dir) / ("snapshot_" + std::to_string(n) + "_agent2.txt")).string(),
            model_to_text(exp.fusion.space2, s2));
      }
    }

    std::ostringstream summary;
    summary << "stop_reason " << stop_reason_name(trace.stop_reason) << "\n";
    summary << "iterations " << trace.iterations() << "\n";
    if (!trace.records.empty())
      summary << "final_stop_metric " << format_g17(trace.records.back().stop_metric) << "\n";
    write_text_file((fs::path(cfg.out_dir) / "summary.txt").string(), summary.str());
    out << summary.str();
    return 0;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_validate(const std::string& config_path, int horizon, std::ostream& out,
                 std::optional<uint64_t> seed_override) {
  if (horizon < 10) return usage_error(out, "horizon too short (need >= 10)");
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const std::exception& e) {
    return usage_error(out, e.what());
  }
  if (seed_override) apply_seed(cfg, *seed_override);
  try {
    Experiment exp = prepare_experiment(cfg);
    RkhsFunction f0_1 = initial_estimate(exp, 1);
    RkhsFunction f0_2 = initial_estimate(exp, 2);
    auto d1 = generate_prefix(exp, 1, horizon);
    auto d2 = generate_prefix(exp, 2, horizon);
    ValiditySequenceReport rep = validate_sequence(exp.fusion, f0_1, f0_2, d1, d2, horizon);
    const char* verdict = rep.verdict == ValidityVerdict::valid_bounded ? "valid-bounded"
                          : rep.verdict == ValidityVerdict::diverging   ? "diverging"
                                                                        : "inconclusive";
    out << "verdict " << verdict << "\n";
    out << "tail_ratio " << format_g17(rep.tail_ratio) << "\n";
    out << "partial_sum " << format_g17(rep.partial_sums.back()) << "\n";
    if (rep.verdict == ValidityVerdict::valid_bounded)
      out << "c_estimate " << format_g17(rep.c_estimate) << "\n";
    switch (rep.verdict) {
      case ValidityVerdict::valid_bounded:
        return 0;
      case ValidityVerdict::diverging:
        return 1;
      case ValidityVerdict::inconclusive:
        return 3;
    }
    return 3;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_norm_sweep(const std::string& config_path, const std::string& operator_name, int decades,
                   const std::string& out_dir_override, std::ostream& out,
                   std::optional<uint64_t> seed_override) {
  SweepTarget target;
  if (operator_name == "agent1")
    target = SweepTarget::agent1;
  else if (operator_name == "agent2")
    target = SweepTarget::agent2;
  else if (operator_name == "multiagent")
    target = SweepTarget::multiagent;
  else if (operator_name == "fusion")
    target = SweepTarget::fusion;
  else
    return usage_error(out, "unknown operator '" + operator_name + "'");
  if (decades < 1) return usage_error(out, "decades must be >= 1");

  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const std::exception& e) {
    return usage_error(out, e.what());
  }
  if (seed_override) apply_seed(cfg, *seed_override);
  if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
  try {
    Experiment exp = prepare_experiment(cfg);
    SamplingConfig scfg;
    scfg.samples = cfg.algorithm.norm_samples;
    scfg.refinement_iters = cfg.algorithm.norm_refine_iters;
    scfg.seed = cfg.seed;
    SweepResult sweep = norm_sweep(exp.fusion, target, decade_grid(decades), scfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    write_sweep_csv((fs::path(cfg.out_dir) / ("sweep_" + operator_name + ".csv")).string(),
                    sweep);
    write_sweep_plot_data(
        (fs::path(cfg.out_dir) / ("sweep_" + operator_name + ".plot")).string(), sweep);
    out << "rows " << sweep.rho_values.size() << "\n";
    out << "final_estimate " << format_g17(sweep.norm_estimates.back().value) << "\n";
    out << "limit_gap " << format_g17(sweep.limit_gap) << "\n";
    return 0;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_diagnose(const std::string& config_path, std::ostream& out,
                 std::optional<uint64_t> seed_override) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const std::exception& e) {
    return usage_error(out, e.what());
  }
  if (seed_override) apply_seed(cfg, *seed_override);
  try {
    Experiment exp = prepare_experiment(cfg);
    bool all_ok = true;

    SpectralReport spec = spectral_check(exp.fusion);
    bool spectral_ok = spec.schur_residual <= 1e-8 && spec.schur_block_bound_holds;
    all_ok = all_ok && spectral_ok;
    out << "[spectral] " << (spectral_ok ? "pass" : "FAIL") << "\n";
    out << spectral_report_text(spec);

    PerturbationReport pert = inverse_perturbation_test(200, 4, cfg.seed);
    bool pert_ok = pert.violations == 0;
    all_ok = all_ok && pert_ok;
    out << "[inverse-perturbation] " << (pert_ok ? "pass" : "FAIL") << " violations "
        << pert.violations << " max_ratio " << format_g17(pert.max_ratio) << "\n";

    auto grid = decade_grid(4);
    ConvergenceReport c1 =
        uniform_convergence_test(exp.fusion, ConvergenceKind::phi1, grid, 200, cfg.seed);
    ConvergenceReport c2 =
        uniform_convergence_test(exp.fusion, ConvergenceKind::phi2phi1, grid, 200, cfg.seed);
    ConvergenceReport c3 =
        uniform_convergence_test(exp.fusion, ConvergenceKind::agent_phi, grid, 200, cfg.seed);
    bool conv_ok = c1.pointwise_violations == 0 &&
                   c2.final_deviation <= c2.sup_deviation.front() + 1e-12 &&
                   c3.final_deviation <= c3.sup_deviation.front() + 0.02;
    all_ok = all_ok && conv_ok;
    out << "[uniform-convergence] " << (conv_ok ? "pass" : "FAIL") << " phi1_violations "
        << c1.pointwise_violations << " phi2phi1_final " << format_g17(c2.final_deviation)
        << " agent_final " << format_g17(c3.final_deviation) << "\n";

    // short run with the trajectory-bound check; the reference instance uses
    // unit-norm initial estimates so the bound's initial bracket is O(1)
    AlgorithmConfig acfg = cfg.algorithm;
    acfg.max_iterations = std::min(acfg.max_iterations, 50);
    acfg.bound_check = true;
    acfg.norm_mode = NormMode::per_iteration;
    acfg.epsilon = 0.0;  // run the full short budget
    Experiment exp2 = exp;
    RkhsFunction f0_1 = initial_estimate(exp2, 1);
    RkhsFunction f0_2 = initial_estimate(exp2, 2);
    auto unit_initial = [](const KnowledgeSpace& sp) {
      Vec mid = 0.5 * (sp.domain.lower + sp.domain.upper);
      Vec c = sym_eig_clamped(sp.gram_local).pinv_apply(kernel_section_at(sp, mid));
      double n = gram_norm(c, sp.gram_local);
      RkhsFunction f{sp.tag(), n > 0 ? Vec(c / n) : c, std::nullopt};
      return f;
    };
    if (cfg.initial1.size() == 0) f0_1 = unit_initial(exp2.fusion.space1);
    if (cfg.initial2.size() == 0) f0_2 = unit_initial(exp2.fusion.space2);
    IterationTrace trace =
        run(exp2.fusion, exp2.ops, acfg, make_generator_source(exp2), f0_1, f0_2);
    BoundCheckResult bc = bound_check(exp2.fusion, trace);
    bool bound_ok = bc.violations == 0;
    all_ok = all_ok && bound_ok;
    out << "[bound-check] " << (bound_ok ? "pass" : "FAIL") << " iterations "
        << trace.iterations() << " violations " << bc.violations << "\n";

    return all_ok ? 0 : 1;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace maea

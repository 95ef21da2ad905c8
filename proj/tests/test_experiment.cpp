#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "support/test_support.hpp"

using namespace maea;
namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& name, const std::string& text) {
  fs::create_directories("exp_test");
  std::string path = "exp_test/" + name;
  write_text_file(path, text);
  return path;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("a complete fixture parses") {
    ExperimentConfig cfg = parse_config_text(test::fixture_config_text());
    CHECK(cfg.seed == 42);
    CHECK(cfg.features1.size() == 2);
    CHECK(cfg.features2.size() == 1);
    CHECK(cfg.algorithm.k_max == 5);
    CHECK(cfg.algorithm.seed == 42);
    CHECK(cfg.decay == DecayKind::geometric);
  }

  SUBCASE("unknown keys are rejected with the line and key name") {
    std::string text = test::fixture_config_text() + "mystery_knob = 3\n";
    try {
      parse_config_text(text);
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      std::string msg = e.what();
      CHECK(msg.find("mystery_knob") != std::string::npos);
      CHECK(msg.find("line") != std::string::npos);
    }
  }

  SUBCASE("malformed values name the line") {
    try {
      parse_config_text("domain.lower = zero\n");
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }

  SUBCASE("missing required pieces are rejected") {
    CHECK_THROWS(parse_config_text("seed = 1\n"));
  }
}

TEST_CASE("cmd_run writes the advertised artifacts") {
  std::string cfg_path =
      write_config("run.cfg", test::fixture_config_text(1e-4, "geometric 0.85", "off", 120, 10) +
                                  "out_dir = exp_test/run_out\n");
  std::ostringstream out;
  int rc = cmd_run(cfg_path, "", out);
  CHECK(rc == 0);
  CHECK(fs::exists("exp_test/run_out/trace.csv"));
  CHECK(fs::exists("exp_test/run_out/summary.txt"));
  CHECK(fs::exists("exp_test/run_out/model_fbar1.txt"));
  CHECK(fs::exists("exp_test/run_out/model_fbar2.txt"));
  CHECK(fs::exists("exp_test/run_out/model_fused.txt"));

  std::string trace = read_text_file("exp_test/run_out/trace.csv");
  CHECK(trace.rfind("n,rho1,rho2,rho,norm_f1,norm_f2,norm_fused,norm_down1,norm_down2,"
                    "psi1,psi2,bound_rhs,stop_metric\n",
                    0) == 0);
  long rows = std::count(trace.begin(), trace.end(), '\n') - 1;
  CHECK(rows >= 6);  // at least k_max + 1 iterations

  // the written models parse back
  ParsedModel m1 = model_from_text(read_text_file("exp_test/run_out/model_fbar1.txt"));
  CHECK(m1.tag == SpaceTag::agent1);
  ParsedModel mf = model_from_text(read_text_file("exp_test/run_out/model_fused.txt"));
  CHECK(mf.tag == SpaceTag::fusion);
}

TEST_CASE("cmd_run reports a budget stop when epsilon is zero") {
  std::string cfg_path =
      write_config("run_eps0.cfg", test::fixture_config_text(0.0, "geometric 0.85", "off", 25,
                                                             25) +
                                       "out_dir = exp_test/run_eps0\n");
  std::ostringstream out;
  int rc = cmd_run(cfg_path, "", out);
  CHECK(rc == 0);
  CHECK(out.str().find("budget") != std::string::npos);
}

TEST_CASE("cmd_run rejects corrupted configs with exit 2") {
  std::string cfg_path = write_config(
      "corrupt.cfg", test::fixture_config_text() + "epsilonn = 1e-4\n");
  std::ostringstream out;
  int rc = cmd_run(cfg_path, "", out);
  CHECK(rc == 2);
  CHECK(out.str().find("epsilonn") != std::string::npos);
  CHECK(cmd_run("exp_test/definitely_missing.cfg", "", out) == 2);
}

TEST_CASE("cmd_run is idempotent for a fixed seed") {
  std::string cfg_path =
      write_config("det.cfg", test::fixture_config_text(1e-4, "geometric 0.85", "off", 60, 30));
  std::ostringstream out;
  CHECK(cmd_run(cfg_path, "exp_test/det_a", out) == 0);
  CHECK(cmd_run(cfg_path, "exp_test/det_b", out) == 0);
  CHECK(read_text_file("exp_test/det_a/trace.csv") == read_text_file("exp_test/det_b/trace.csv"));
  CHECK(read_text_file("exp_test/det_a/model_fused.txt") ==
        read_text_file("exp_test/det_b/model_fused.txt"));
}

TEST_CASE("cmd_validate classifies the generators") {
  std::ostringstream out;
  std::string decaying =
      write_config("validate_decay.cfg", test::fixture_config_text());
  CHECK(cmd_validate(decaying, 50, out) == 0);

  std::string constant =
      write_config("validate_const.cfg", test::fixture_config_text(1e-4, "none"));
  CHECK(cmd_validate(constant, 50, out) == 1);

  CHECK(cmd_validate(decaying, 5, out) == 2);  // horizon too short
}

TEST_CASE("cmd_norm_sweep") {
  std::string cfg_path = write_config(
      "sweep.cfg", test::fixture_config_text() + "out_dir = exp_test/sweep_out\n" +
                       "norm_samples = 120\n");
  std::ostringstream out;

  SUBCASE("writes decades + 1 rows") {
    CHECK(cmd_norm_sweep(cfg_path, "agent1", 4, "", out) == 0);
    std::string csv = read_text_file("exp_test/sweep_out/sweep_agent1.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 5 rows
  }

  SUBCASE("rejects unknown operators") {
    CHECK(cmd_norm_sweep(cfg_path, "warp", 4, "", out) == 2);
  }

  SUBCASE("fixed seed reruns are byte-identical") {
    CHECK(cmd_norm_sweep(cfg_path, "agent2", 3, "exp_test/sweep_a", out) == 0);
    CHECK(cmd_norm_sweep(cfg_path, "agent2", 3, "exp_test/sweep_b", out) == 0);
    CHECK(read_text_file("exp_test/sweep_a/sweep_agent2.csv") ==
          read_text_file("exp_test/sweep_b/sweep_agent2.csv"));
  }
}

TEST_CASE("cmd_diagnose") {
  std::ostringstream out;
  std::string cfg_path = write_config(
      "diag.cfg", test::fixture_config_text(1e-4, "geometric 0.85", "off", 50, 10) +
                      "norm_samples = 64\n");
  CHECK(cmd_diagnose(cfg_path, out) == 0);
  std::string report = out.str();
  CHECK(report.find("[spectral] pass") != std::string::npos);
  CHECK(report.find("[inverse-perturbation] pass") != std::string::npos);
  CHECK(report.find("[uniform-convergence] pass") != std::string::npos);
  CHECK(report.find("[bound-check] pass") != std::string::npos);

  std::ostringstream out2;
  CHECK(cmd_diagnose("exp_test/nope.cfg", out2) == 2);
}

TEST_CASE("seed override changes the stream") {
  std::string cfg_path =
      write_config("seed.cfg", test::fixture_config_text(1e-4, "geometric 0.85", "off", 40, 20));
  std::ostringstream out;
  CHECK(cmd_run(cfg_path, "exp_test/seed_a", out) == 0);
  CHECK(cmd_run(cfg_path, "exp_test/seed_b", out, 777) == 0);
  CHECK(read_text_file("exp_test/seed_a/trace.csv") !=
        read_text_file("exp_test/seed_b/trace.csv"));
}

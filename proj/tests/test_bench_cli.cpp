#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "delayadp/benchmarks.hpp"

using namespace delayadp;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const int status = std::system(("./delay-adp " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

ExperimentConfig fast_scalar_config() {
  ExperimentConfig cfg;
  cfg.name = "custom";
  cfg.sys.A = MatrixXd::Constant(1, 1, -1.0);
  cfg.sys.Ad = MatrixXd::Constant(1, 1, 0.1);
  cfg.sys.B = MatrixXd::Constant(1, 1, 1.0);
  cfg.sys.tau = 1.0;
  cfg.Q = MatrixXd::Identity(1, 1);
  cfg.R = MatrixXd::Identity(1, 1);
  cfg.K01 = MatrixXd::Zero(1, 1);
  cfg.grid = 50;
  cfg.dt = 1e-2;
  cfg.horizon = 5.0;
  cfg.window = 4.0;
  cfg.theta_grid = 50;
  cfg.exploration = {1.0, 20, -20.0, 20.0};
  cfg.history = {1.0, 3, -5.0, 5.0, -1.0, 1.0};
  return cfg;
}

std::string write_config(const ExperimentConfig& cfg, const std::string& tag) {
  const std::string path = "cli_cfg_" + tag + ".json";
  std::ofstream out(path);
  out << cfg.to_json();
  return path;
}

}  // namespace

TEST_CASE("metal cutting benchmark constants") {
  const ExperimentConfig cfg = benchmark_metal_cutting();
  CHECK(cfg.name == "metal-cutting");
  CHECK(cfg.sys.A(0, 0) == 0.0);
  CHECK(cfg.sys.A(0, 1) == 1.0);
  CHECK(cfg.sys.A(1, 0) == doctest::Approx(-10.5));
  CHECK(cfg.sys.A(1, 1) == doctest::Approx(-0.1));
  CHECK(cfg.sys.Ad(1, 0) == doctest::Approx(0.5));
  CHECK(cfg.sys.Ad(0, 0) == 0.0);
  CHECK(cfg.sys.Ad(0, 1) == 0.0);
  CHECK(cfg.sys.Ad(1, 1) == 0.0);
  CHECK(cfg.sys.B(0, 0) == 0.0);
  CHECK(cfg.sys.B(1, 0) == doctest::Approx(0.5));
  CHECK(cfg.sys.tau == doctest::Approx(1.3));
  CHECK((cfg.Q - 100.0 * MatrixXd::Identity(2, 2)).norm() == 0.0);
  CHECK(cfg.R(0, 0) == 1.0);
  CHECK(cfg.K01(0, 0) == doctest::Approx(1.7417));
  CHECK(cfg.K01(0, 1) == doctest::Approx(3.9239));
  CHECK(cfg.exploration.amplitude == doctest::Approx(20.0));
  CHECK(cfg.exploration.num_terms == 50);
  CHECK(cfg.exploration.freq_min == doctest::Approx(-10.0));
  CHECK(cfg.exploration.freq_max == doctest::Approx(10.0));
  CHECK(cfg.delta == doctest::Approx(1e-3));
  CHECK_NOTHROW(cfg.validate());

  // The initial law carries no distributed gain.
  const FeedbackLaw law = cfg.initial_law();
  CHECK((law.K0 - cfg.K01).norm() == 0.0);
  for (const auto& k1 : law.K1) CHECK(k1.norm() == 0.0);
}

TEST_CASE("cav benchmark constants") {
  const ExperimentConfig cfg = benchmark_cav();
  CHECK(cfg.name == "cav");
  CHECK(cfg.sys.n() == 4);
  CHECK(cfg.sys.Ad(1, 0) == doctest::Approx(0.15708));
  CHECK(cfg.sys.Ad(1, 1) == doctest::Approx(-0.3));
  CHECK(cfg.sys.tau == doctest::Approx(1.2));
  VectorXd qdiag(4);
  qdiag << 1.0, 1.0, 10.0, 10.0;
  CHECK((cfg.Q - MatrixXd(qdiag.asDiagonal())).norm() == 0.0);
  CHECK(cfg.R(0, 0) == 1.0);
  CHECK(cfg.K01(0, 0) == doctest::Approx(-0.0897));
  CHECK(cfg.K01(0, 1) == doctest::Approx(-0.2772));
  CHECK(cfg.K01(0, 2) == doctest::Approx(-0.3));
  CHECK(cfg.K01(0, 3) == doctest::Approx(0.5196));
  CHECK(cfg.exploration.num_terms == 200);
  CHECK(cfg.exploration.freq_min == doctest::Approx(-100.0));
  CHECK(cfg.exploration.freq_max == doctest::Approx(100.0));
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("benchmark lookup by name") {
  CHECK(benchmark_by_name("metal-cutting").name == "metal-cutting");
  CHECK(benchmark_by_name("cav").name == "cav");
  CHECK_THROWS_AS(benchmark_by_name("unknown"), std::invalid_argument);
}

TEST_CASE("validation reports the offending field") {
  ExperimentConfig cfg = fast_scalar_config();
  cfg.dt = -1.0;
  try {
    cfg.validate();
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("dt") != std::string::npos);
  }

  cfg = fast_scalar_config();
  cfg.Q = MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = fast_scalar_config();
  cfg.quadrature = "gauss";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = fast_scalar_config();
  cfg.rank_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config json round trip") {
  ExperimentConfig cfg = fast_scalar_config();
  cfg.noise_sigma = 0.25;
  cfg.seed = 42;
  cfg.strict_excitation = true;
  cfg.rank_threshold = 1e-5;
  cfg.quadrature = "simpson";
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.name == cfg.name);
  CHECK((back.sys.A - cfg.sys.A).norm() == 0.0);
  CHECK((back.sys.Ad - cfg.sys.Ad).norm() == 0.0);
  CHECK((back.sys.B - cfg.sys.B).norm() == 0.0);
  CHECK(back.sys.tau == cfg.sys.tau);
  CHECK((back.Q - cfg.Q).norm() == 0.0);
  CHECK((back.K01 - cfg.K01).norm() == 0.0);
  CHECK(back.dt == cfg.dt);
  CHECK(back.window == cfg.window);
  CHECK(back.noise_sigma == cfg.noise_sigma);
  CHECK(back.seed == cfg.seed);
  CHECK(back.strict_excitation == cfg.strict_excitation);
  CHECK(back.rank_threshold == cfg.rank_threshold);
  CHECK(back.theta_grid == cfg.theta_grid);
  CHECK(back.quadrature == cfg.quadrature);
  CHECK(back.exploration.amplitude == cfg.exploration.amplitude);
  CHECK(back.history.amplitude == cfg.history.amplitude);
}

TEST_CASE("cli simulate succeeds and writes artifacts") {
  const std::string cfg_path = write_config(fast_scalar_config(), "ok");
  const std::string out = "cli_out_ok";
  fs::remove_all(out);
  CHECK(run_cli("simulate --config " + cfg_path + " --out " + out) == 0);
  CHECK(fs::exists(out + "/trajectory.csv"));
  REQUIRE(fs::exists(out + "/summary.json"));
  std::ifstream in(out + "/summary.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("schema") == 1);
  CHECK(j.at("command") == "simulate");
  fs::remove_all(out);
  fs::remove(cfg_path);
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
  CHECK(run_cli("simulate") == 2);
  CHECK(run_cli("simulate --benchmark unknown") == 2);

  ExperimentConfig cfg = fast_scalar_config();
  cfg.dt = -1.0;
  const std::string cfg_path = write_config(cfg, "bad");
  CHECK(run_cli("simulate --config " + cfg_path) == 2);
  CHECK(run_cli("simulate --config " + cfg_path +
                " --benchmark metal-cutting") == 2);
  fs::remove(cfg_path);
}

TEST_CASE("cli surfaces excitation failure as exit code 3") {
  // Zero history and zero exploration produce an all-zero trajectory, so
  // the excitation Gram is zero; strict mode must abort with the dedicated
  // exit code.
  ExperimentConfig cfg = fast_scalar_config();
  cfg.strict_excitation = true;
  cfg.exploration.amplitude = 0.0;
  cfg.history = {0.0, 0, 0.0, 0.0, 0.0, 0.0};
  const std::string cfg_path = write_config(cfg, "exc");
  const std::string out = "cli_out_exc";
  CHECK(run_cli("data-pi --config " + cfg_path + " --out " + out) == 3);
  fs::remove_all(out);
  fs::remove(cfg_path);
}

TEST_CASE("cli surfaces numerical blow-up as exit code 4") {
  ExperimentConfig cfg = fast_scalar_config();
  cfg.sys.A(0, 0) = 2.0;  // open-loop unstable, zero initial gain
  cfg.horizon = 40.0;
  const std::string cfg_path = write_config(cfg, "blowup");
  const std::string out = "cli_out_blowup";
  CHECK(run_cli("simulate --config " + cfg_path + " --out " + out) == 4);
  fs::remove_all(out);
  fs::remove(cfg_path);
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "delayadp/adp_pi.hpp"
#include "delayadp/basis.hpp"
#include "delayadp/benchmarks.hpp"
#include "delayadp/model_pi.hpp"
#include "delayadp/semidisc.hpp"
#include "delayadp/value_kernel.hpp"

namespace {

using nlohmann::json;
using namespace delayadp;

struct CommonArgs {
  std::string config_path;
  std::string benchmark;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--benchmark", args.benchmark,
                  "named benchmark (metal-cutting|cav)");
  cmd->add_option("--seed", args.seed, "rng seed override");
  cmd->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = ExperimentConfig::from_file(args.config_path);
    if (!args.benchmark.empty() && args.benchmark != cfg.name) {
      throw std::invalid_argument(
          "--benchmark conflicts with the benchmark named in the config");
    }
  } else if (!args.benchmark.empty()) {
    cfg = benchmark_by_name(args.benchmark);
  } else {
    throw std::invalid_argument("either --config or --benchmark is required");
  }
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

json matrix_json(const MatrixXd& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(row);
  }
  return rows;
}

json law_json(const FeedbackLaw& law) {
  json j;
  j["K0"] = matrix_json(law.K0);
  json k1 = json::array();
  for (const auto& g : law.K1) k1.push_back(matrix_json(g));
  j["K1"] = k1;
  j["tau"] = law.tau;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

json summary_header(const std::string& command, const ExperimentConfig& cfg) {
  json j;
  j["schema"] = 1;
  j["command"] = command;
  j["benchmark"] = cfg.name;
  j["seed"] = cfg.seed;
  return j;
}

// Exploratory closed-loop run under the initial law plus exploration noise.
Trajectory collect_data(const ExperimentConfig& cfg) {
  const SegmentState x0 = random_history(cfg.history, cfg.seed, cfg.sys.n(),
                                         cfg.sys.tau, cfg.grid);
  const ExplorationSignal noise(cfg.exploration.amplitude,
                                cfg.exploration.num_terms,
                                cfg.exploration.freq_min,
                                cfg.exploration.freq_max, cfg.seed + 1,
                                cfg.sys.m());
  const FeedbackLaw law = cfg.initial_law();
  const double horizon = cfg.window + cfg.segment_samples * cfg.dt;
  Trajectory traj = simulate(cfg.sys, law, &noise, x0, horizon, cfg.dt);
  if (cfg.noise_sigma > 0.0) {
    traj = add_measurement_noise(traj, cfg.noise_sigma, cfg.seed + 2);
  }
  return traj;
}

std::vector<adp_pi::DataPiIterate> run_data_pi(const ExperimentConfig& cfg,
                                               const Trajectory& traj) {
  const auto bounds =
      adp_pi::SegmentBoundaries::uniform(traj, cfg.window, cfg.segment_samples);
  const auto basis = basis::BasisSet::polynomial(cfg.degree, cfg.sys.tau);
  adp_pi::DataPiOptions opts;
  opts.delta = cfg.delta;
  opts.max_iter = cfg.max_iter;
  opts.alpha = cfg.alpha;
  opts.strict_excitation = cfg.strict_excitation;
  opts.rank_threshold = cfg.rank_threshold;
  opts.theta_grid = cfg.theta_grid;
  opts.law_grid = cfg.grid;
  opts.rule = cfg.quadrature == "simpson" ? QuadratureRule::Simpson
                                          : QuadratureRule::Trapezoid;
  return adp_pi::run(traj, bounds, cfg.initial_law(), basis, cfg.Q, cfg.R,
                     opts);
}

double policy_cost(const ExperimentConfig& cfg, const FeedbackLaw& law) {
  const SegmentState x0 = random_history(cfg.history, cfg.seed, cfg.sys.n(),
                                         cfg.sys.tau, cfg.grid);
  return eval_cost(cfg.sys, law, x0, cfg.Q, cfg.R, cfg.horizon, cfg.dt).cost;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  const SegmentState x0 = random_history(cfg.history, cfg.seed, cfg.sys.n(),
                                         cfg.sys.tau, cfg.grid);
  const FeedbackLaw law = cfg.initial_law();
  const Trajectory traj = simulate(cfg.sys, law, nullptr, x0, cfg.horizon,
                                   cfg.dt);
  const std::string csv = cfg.out_dir + "/trajectory.csv";
  traj.to_csv(csv);

  json j = summary_header("simulate", cfg);
  j["trajectory_csv"] = csv;
  j["samples"] = traj.total();
  j["final_state_norm"] = traj.x.col(traj.total() - 1).norm();
  j["decay_rate"] = fit_decay_rate(traj);
  write_text(cfg.out_dir + "/summary.json", j.dump(2));
  return 0;
}

int cmd_model_pi(const ExperimentConfig& cfg) {
  model_pi::ModelPiOptions opts;
  opts.grid = cfg.grid;
  const auto iterates = model_pi::run(cfg.sys, cfg.Q, cfg.R,
                                      cfg.initial_law(), opts);

  json iter_log = json::array();
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    json e;
    e["iteration"] = i + 1;
    e["solve_residual"] = iterates[i].solve_residual;
    e["gain_delta"] = iterates[i].gain_delta;
    e["K0"] = matrix_json(iterates[i].law.K0);
    iter_log.push_back(e);
  }
  write_text(cfg.out_dir + "/model_pi_iterates.json", iter_log.dump(2));
  const auto& final = iterates.back();
  write_text(cfg.out_dir + "/kernel.json", final.kernel.to_json());
  write_text(cfg.out_dir + "/law.json", law_json(final.law).dump(2));

  json j = summary_header("model-pi", cfg);
  j["iterations"] = iterates.size();
  j["final_gain_delta"] = final.gain_delta;
  j["riccati_residual"] =
      model_pi::riccati_residual(cfg.sys, cfg.Q, cfg.R, final.kernel);
  j["K0"] = matrix_json(final.law.K0);
  j["cost"] = policy_cost(cfg, final.law);
  write_text(cfg.out_dir + "/summary.json", j.dump(2));
  return 0;
}

int cmd_data_pi(const ExperimentConfig& cfg) {
  const Trajectory traj = collect_data(cfg);
  const auto iterates = run_data_pi(cfg, traj);

  std::ofstream conv(cfg.out_dir + "/upsilon_convergence.csv");
  conv << "iteration,upsilon_change,regression_residual,excitation_min_eig\n";
  conv << std::setprecision(17);
  json iter_log = json::array();
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    const auto& it = iterates[i];
    conv << i + 1 << ',' << it.upsilon_change << ',' << it.residual << ','
         << it.min_eig << '\n';
    json e;
    e["iteration"] = i + 1;
    e["upsilon_change"] = it.upsilon_change;
    e["regression_residual"] = it.residual;
    e["K0"] = matrix_json(it.law.K0);
    iter_log.push_back(e);
  }
  conv.close();
  write_text(cfg.out_dir + "/data_pi_iterates.json", iter_log.dump(2));

  const basis::WeightLayout lay(cfg.sys.n(), cfg.sys.m(),
                                basis::BasisSet::polynomial(cfg.degree,
                                                            cfg.sys.tau));
  write_text(cfg.out_dir + "/weights.json",
             basis::weights_to_json(iterates.back().upsilon, lay, cfg.degree));
  write_text(cfg.out_dir + "/law.json",
             law_json(iterates.back().law).dump(2));

  json j = summary_header("data-pi", cfg);
  j["iterations"] = iterates.size();
  j["converged"] = iterates.back().upsilon_change < cfg.delta;
  j["final_upsilon_change"] = iterates.back().upsilon_change;
  j["regression_residual"] = iterates.back().residual;
  j["excitation_min_eig"] = iterates.back().min_eig;
  j["K0"] = matrix_json(iterates.back().law.K0);
  j["cost_initial"] = policy_cost(cfg, cfg.initial_law());
  j["cost_final"] = policy_cost(cfg, iterates.back().law);
  write_text(cfg.out_dir + "/summary.json", j.dump(2));
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
  const Trajectory traj = collect_data(cfg);
  const auto iterates = run_data_pi(cfg, traj);
  const FeedbackLaw& learned = iterates.back().law;

  const auto aug = semidisc::semidiscretize(cfg.sys, cfg.dt_d);
  const MatrixXd Qbar = semidisc::lift_state_cost(aug, cfg.Q);
  const auto lqr = semidisc::dlqr(aug, Qbar, cfg.R);

  const SegmentState x0 = random_history(cfg.history, cfg.seed, cfg.sys.n(),
                                         cfg.sys.tau, cfg.grid);
  const double cost_adp =
      eval_cost(cfg.sys, learned, x0, cfg.Q, cfg.R, cfg.horizon, cfg.dt).cost;
  const double cost_dlqr = semidisc::continuous_cost_sampled(
      cfg.sys, aug, lqr.gain, x0, cfg.Q, cfg.R, cfg.horizon, cfg.dt);
  const double rho_adp = semidisc::closed_loop_radius(cfg.sys, learned, cfg.dt_d);
  const double rho_dlqr = semidisc::spectral_radius_closed_loop(aug, lqr.gain);

  std::ofstream csv(cfg.out_dir + "/comparison.csv");
  csv << "policy,continuous_cost,spectral_radius,iterations\n";
  csv << std::setprecision(17);
  csv << "data-pi," << cost_adp << ',' << rho_adp << ',' << iterates.size()
      << '\n';
  csv << "semidisc-dlqr," << cost_dlqr << ',' << rho_dlqr << ','
      << lqr.iterations << '\n';
  csv.close();

  json j = summary_header("compare", cfg);
  j["cost_data_pi"] = cost_adp;
  j["cost_dlqr"] = cost_dlqr;
  j["spectral_radius_data_pi"] = rho_adp;
  j["spectral_radius_dlqr"] = rho_dlqr;
  j["data_pi_iterations"] = iterates.size();
  write_text(cfg.out_dir + "/summary.json", j.dump(2));
  return 0;
}

int cmd_noise_study(const ExperimentConfig& cfg) {
  const double sigma_max =
      cfg.noise_sigma > 0.0 ? cfg.noise_sigma : std::sqrt(0.2);
  const std::vector<double> sigmas = {0.0, 0.25 * sigma_max, 0.5 * sigma_max,
                                      0.75 * sigma_max, sigma_max};

  std::ofstream csv(cfg.out_dir + "/noise_study.csv");
  csv << "sigma,iterations,converged,cost_final\n";
  csv << std::setprecision(17);
  json runs = json::array();
  for (double sigma : sigmas) {
    ExperimentConfig c = cfg;
    c.noise_sigma = sigma;
    const Trajectory traj = collect_data(c);
    const auto iterates = run_data_pi(c, traj);
    const bool converged = iterates.back().upsilon_change < c.delta;
    const double cost = policy_cost(cfg, iterates.back().law);
    csv << sigma << ',' << iterates.size() << ',' << (converged ? 1 : 0) << ','
        << cost << '\n';
    json e;
    e["sigma"] = sigma;
    e["iterations"] = iterates.size();
    e["converged"] = converged;
    e["cost_final"] = cost;
    runs.push_back(e);
  }
  csv.close();

  json j = summary_header("noise-study", cfg);
  j["runs"] = runs;
  write_text(cfg.out_dir + "/summary.json", j.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of linear time-delay systems: model-based and "
               "data-driven policy iteration"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "closed-loop trajectory under the initial law");
  auto* model_pi_cmd =
      app.add_subcommand("model-pi", "model-based policy iteration");
  auto* data_pi_cmd =
      app.add_subcommand("data-pi", "data-driven policy iteration");
  auto* compare_cmd =
      app.add_subcommand("compare", "learned policy vs semi-discretized DLQR");
  auto* noise_cmd =
      app.add_subcommand("noise-study", "data-pi under measurement noise");
  for (auto* cmd :
       {simulate_cmd, model_pi_cmd, data_pi_cmd, compare_cmd, noise_cmd}) {
    add_common(cmd, args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = load_config(args);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg);
    if (model_pi_cmd->parsed()) return cmd_model_pi(cfg);
    if (data_pi_cmd->parsed()) return cmd_data_pi(cfg);
    if (compare_cmd->parsed()) return cmd_compare(cfg);
    if (noise_cmd->parsed()) return cmd_noise_study(cfg);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const adp_pi::ExcitationError& e) {
    std::cerr << "excitation failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  }
}

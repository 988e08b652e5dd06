#pragma once

#include <cstdint>
#include <string>

#include "delayadp/dde_sim.hpp"

// Experiment configuration: a plant plus every knob of the learning setup.
// Named benchmarks expand to pinned parameter sets; an explicit JSON config
// overrides field by field.
namespace delayadp {

struct ExplorationSpec {
  double amplitude = 0.0;
  int num_terms = 0;
  double freq_min = 0.0;
  double freq_max = 0.0;
};

struct ExperimentConfig {
  std::string name;  // "metal-cutting", "cav", or "custom"
  DelaySystem sys;
  MatrixXd Q;
  MatrixXd R;
  MatrixXd K01;  // initial gain, K1 of the initial law is zero

  int degree = 3;           // basis degree
  int grid = 100;           // theta grid for kernels and quadrature
  double dt = 1e-3;         // simulation step
  double horizon = 40.0;    // cost-evaluation horizon
  int segment_samples = 10; // samples per regression segment
  double window = 8.0;      // learning-window length [t1, t_{L+1}]
  double delta = 1e-3;      // data-PI stopping threshold
  double alpha = 1e-8;      // excitation threshold
  bool strict_excitation = false;  // abort on a failed excitation check
  double rank_threshold = 1e-9;    // singular-value cutoff in the solve
  int theta_grid = 100;            // quadrature grid for regression features
  std::string quadrature = "trapezoid";  // or "simpson"
  int max_iter = 20;        // data-PI iteration cap
  double dt_d = 0.1;        // semi-discretization step for `compare`
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::string out_dir = ".";

  ExplorationSpec exploration;
  HistorySpec history;

  FeedbackLaw initial_law() const;
  void validate() const;  // throws std::invalid_argument with the field name

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

ExperimentConfig benchmark_metal_cutting();
ExperimentConfig benchmark_cav();
// Lookup by name; throws std::invalid_argument for unknown names.
ExperimentConfig benchmark_by_name(const std::string& name);

}  // namespace delayadp

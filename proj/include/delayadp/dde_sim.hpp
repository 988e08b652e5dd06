#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Simulation of the linear time-delay plant
//   x'(t) = A x(t) + A_d x(t - tau) + B u(t)
// by the method of steps: fixed-step RK4 with linear interpolation of the
// stored history for the delayed argument.
namespace delayadp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DelaySystem {
  MatrixXd A;   // n x n
  MatrixXd Ad;  // n x n, delayed-state coupling
  MatrixXd B;   // n x m
  double tau = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  void validate() const;  // throws std::invalid_argument
};

// The function-valued state x_t on [-tau, 0], sampled on a uniform grid of
// G+1 nodes.  Node g sits at theta = -tau + g * tau/G; node G is x(t).
class SegmentState {
 public:
  SegmentState() = default;
  SegmentState(double tau, MatrixXd samples);  // samples: n x (G+1)

  static SegmentState constant(const VectorXd& value, double tau, int grid);
  static SegmentState zero(int n, double tau, int grid);

  double tau() const { return tau_; }
  int n() const { return static_cast<int>(samples_.rows()); }
  int grid() const { return static_cast<int>(samples_.cols()) - 1; }
  double spacing() const { return tau_ / grid(); }
  const MatrixXd& samples() const { return samples_; }
  double theta(int g) const { return -tau_ + g * spacing(); }

  // Value at node g; node grid() is the head x(t).
  VectorXd node(int g) const { return samples_.col(g); }
  VectorXd head() const { return samples_.col(grid()); }

  // Linear interpolation at arbitrary theta in [-tau, 0].
  VectorXd at(double theta) const;

  // Resample onto a grid with `grid` intervals by linear interpolation.
  SegmentState resampled(int grid) const;

 private:
  double tau_ = 0.0;
  MatrixXd samples_;
};

// Distributed-delay linear state feedback
//   u(x_t) = -K0 x(t) - integral K1(theta) x_t(theta) dtheta.
// K1 is stored on a uniform theta grid with G+1 nodes.
struct FeedbackLaw {
  MatrixXd K0;               // m x n
  std::vector<MatrixXd> K1;  // G+1 gains, node g at theta = -tau + g*tau/G
  double tau = 0.0;

  int grid() const { return static_cast<int>(K1.size()) - 1; }
  static FeedbackLaw zero_k1(MatrixXd K0, double tau, int grid);
  // K1 at arbitrary theta by linear interpolation between nodes.
  MatrixXd k1_at(double theta) const;
};

// Sum-of-sinusoids exploration input, deterministic per seed:
//   e(t) = amplitude * sum_{i=1}^{num_terms} sin(w_i t),  w_i ~ U[freq range].
class ExplorationSignal {
 public:
  ExplorationSignal() = default;
  ExplorationSignal(double amplitude, int num_terms, double freq_min,
                    double freq_max, std::uint64_t seed, int m);

  VectorXd at(double t) const;
  bool empty() const { return m_ == 0; }
  int m() const { return m_; }

 private:
  double amplitude_ = 0.0;
  int m_ = 0;
  std::vector<std::vector<double>> freqs_;  // one frequency set per input
};

// Densely sampled trajectory including the pre-history on [t0 - tau, t0].
// Sample j holds x and u at time t_start + j*dt, with t_start = t0 - tau.
struct Trajectory {
  double dt = 0.0;
  double t0 = 0.0;
  int history_count = 0;  // samples strictly before t0 (= tau/dt)
  MatrixXd x;             // n x total
  MatrixXd u;             // m x total

  int total() const { return static_cast<int>(x.cols()); }
  double t_start() const { return t0 - history_count * dt; }
  double t_end() const { return t_start() + (total() - 1) * dt; }
  double time_at(int j) const { return t_start() + j * dt; }
  // Nearest sample index for time t (t must align with the grid).
  int index_of(double t) const;
  // State at time t with linear interpolation between samples.
  VectorXd x_at(double t) const;
  VectorXd u_at(double t) const;

  void to_csv(const std::string& path) const;
  static Trajectory from_csv(const std::string& path, double tau);
};

struct SimulateOptions {
  double blowup_limit = 1e12;
};

// Integrate the closed/open loop from history x0 for `horizon` seconds with
// step dt.  dt must divide tau exactly.  Throws std::runtime_error on
// blow-up.
Trajectory simulate(const DelaySystem& sys,
                    const std::optional<FeedbackLaw>& controller,
                    const ExplorationSignal* exploration,
                    const SegmentState& x0, double horizon, double dt,
                    const SimulateOptions& opts = {});

// -K0 x_t(0) - trapezoid(K1(theta) x_t(theta)) on the law's grid.
VectorXd eval_feedback(const FeedbackLaw& law, const SegmentState& xt);

// Feedback evaluated at trajectory sample j, reading x_t directly from the
// stored samples (linear interpolation at the law's theta nodes).
VectorXd eval_feedback_traj(const FeedbackLaw& law, const Trajectory& traj,
                            int j);

// Segment state ending at trajectory sample j, resampled onto `grid`.
SegmentState segment_at(const Trajectory& traj, int j, double tau, int grid);

struct HistorySpec {
  double amplitude = 0.0;
  int num_sines = 0;
  double freq_min = -10.0;
  double freq_max = 10.0;
  double offset_min = 0.0;
  double offset_max = 0.0;
};

// Per-coordinate sum of sinusoids plus constant offset, deterministic per
// seed: [x0(theta)]_i = amplitude * sum_j sin(w_ij theta) + chi_i.
SegmentState random_history(const HistorySpec& spec, std::uint64_t seed, int n,
                            double tau, int grid);

// Adds i.i.d. N(0, sigma^2) noise to every state sample; inputs untouched.
Trajectory add_measurement_noise(const Trajectory& traj, double sigma,
                                 std::uint64_t seed);

// Least-squares fit of log|x(t)| ~ log C - lambda t over the trajectory's
// post-t0 samples.  Returns the decay rate lambda (positive means decaying).
double fit_decay_rate(const Trajectory& traj);

}  // namespace delayadp

#include "delayadp/dde_sim.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

namespace delayadp {

namespace {

int exact_ratio(double tau, double dt, const char* what) {
  const double r = tau / dt;
  const int ri = static_cast<int>(std::lround(r));
  if (ri < 1 || std::abs(r - ri) > 1e-9 * std::max(1.0, r)) {
    throw std::invalid_argument(std::string(what) +
                                ": dt must divide tau with integer ratio");
  }
  return ri;
}

}  // namespace

void DelaySystem::validate() const {
  if (tau <= 0.0) throw std::invalid_argument("DelaySystem: tau must be > 0");
  const int nn = n();
  if (A.rows() != nn || A.cols() != nn || Ad.rows() != nn || Ad.cols() != nn ||
      B.rows() != nn || B.cols() < 1) {
    throw std::invalid_argument("DelaySystem: inconsistent dimensions");
  }
  if (!A.allFinite() || !Ad.allFinite() || !B.allFinite()) {
    throw std::invalid_argument("DelaySystem: non-finite entries");
  }
}

SegmentState::SegmentState(double tau, MatrixXd samples)
    : tau_(tau), samples_(std::move(samples)) {
  if (tau_ <= 0.0 || samples_.cols() < 2 || samples_.rows() < 1) {
    throw std::invalid_argument("SegmentState: need tau > 0 and >= 2 nodes");
  }
}

SegmentState SegmentState::constant(const VectorXd& value, double tau,
                                    int grid) {
  MatrixXd s(value.size(), grid + 1);
  s.colwise() = value;
  return SegmentState(tau, std::move(s));
}

SegmentState SegmentState::zero(int n, double tau, int grid) {
  return constant(VectorXd::Zero(n), tau, grid);
}

VectorXd SegmentState::at(double theta) const {
  const double pos = (theta + tau_) / spacing();
  const int g0 = std::max(0, std::min(grid() - 1, static_cast<int>(pos)));
  const double f = std::min(1.0, std::max(0.0, pos - g0));
  return (1.0 - f) * samples_.col(g0) + f * samples_.col(g0 + 1);
}

SegmentState SegmentState::resampled(int grid) const {
  if (grid == this->grid()) return *this;
  MatrixXd s(n(), grid + 1);
  for (int g = 0; g <= grid; ++g) {
    s.col(g) = at(-tau_ + g * tau_ / grid);
  }
  return SegmentState(tau_, std::move(s));
}

FeedbackLaw FeedbackLaw::zero_k1(MatrixXd K0, double tau, int grid) {
  FeedbackLaw law;
  law.tau = tau;
  law.K1.assign(grid + 1,
                MatrixXd::Zero(K0.rows(), K0.cols()));
  law.K0 = std::move(K0);
  return law;
}

MatrixXd FeedbackLaw::k1_at(double theta) const {
  const int G = grid();
  const double pos = (theta + tau) / (tau / G);
  const int g0 = std::max(0, std::min(G - 1, static_cast<int>(pos)));
  const double f = std::min(1.0, std::max(0.0, pos - g0));
  return (1.0 - f) * K1[g0] + f * K1[g0 + 1];
}

ExplorationSignal::ExplorationSignal(double amplitude, int num_terms,
                                     double freq_min, double freq_max,
                                     std::uint64_t seed, int m)
    : amplitude_(amplitude), m_(m) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(freq_min, freq_max);
  freqs_.resize(m);
  for (int c = 0; c < m; ++c) {
    freqs_[c].resize(num_terms);
    for (int i = 0; i < num_terms; ++i) freqs_[c][i] = dist(rng);
  }
}

VectorXd ExplorationSignal::at(double t) const {
  VectorXd e = VectorXd::Zero(m_);
  for (int c = 0; c < m_; ++c) {
    double s = 0.0;
    for (double w : freqs_[c]) s += std::sin(w * t);
    e[c] = amplitude_ * s;
  }
  return e;
}

int Trajectory::index_of(double t) const {
  const double pos = (t - t_start()) / dt;
  const int j = static_cast<int>(std::lround(pos));
  if (j < 0 || j >= total() || std::abs(pos - j) > 1e-6) {
    throw std::out_of_range("Trajectory::index_of: time off the sample grid");
  }
  return j;
}

namespace {

VectorXd sample_interp(const MatrixXd& cols, double pos) {
  const int last = static_cast<int>(cols.cols()) - 1;
  if (pos <= 0.0) return cols.col(0);
  if (pos >= last) return cols.col(last);
  const int j0 = static_cast<int>(pos);
  const double f = pos - j0;
  return (1.0 - f) * cols.col(j0) + f * cols.col(j0 + 1);
}

}  // namespace

VectorXd Trajectory::x_at(double t) const {
  return sample_interp(x, (t - t_start()) / dt);
}

VectorXd Trajectory::u_at(double t) const {
  return sample_interp(u, (t - t_start()) / dt);
}

void Trajectory::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t";
  for (int i = 0; i < x.rows(); ++i) out << ", x" << (i + 1);
  for (int i = 0; i < u.rows(); ++i) out << ", u" << (i + 1);
  out << "\n";
  out << std::setprecision(17);
  for (int j = 0; j < total(); ++j) {
    out << time_at(j);
    for (int i = 0; i < x.rows(); ++i) out << ", " << x(i, j);
    for (int i = 0; i < u.rows(); ++i) out << ", " << u(i, j);
    out << "\n";
  }
}

Trajectory Trajectory::from_csv(const std::string& path, double tau) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  int nx = 0, nu = 0;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) {
      const auto p = col.find_first_not_of(" \t");
      if (p == std::string::npos) continue;
      if (col[p] == 'x') ++nx;
      if (col[p] == 'u') ++nu;
    }
  }
  if (nx < 1 || nu < 1) throw std::runtime_error("bad trajectory header");
  std::vector<double> times;
  std::vector<VectorXd> xs, us;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != 1 + nx + nu) {
      throw std::runtime_error("bad trajectory row");
    }
    times.push_back(vals[0]);
    xs.push_back(Eigen::Map<VectorXd>(vals.data() + 1, nx));
    us.push_back(Eigen::Map<VectorXd>(vals.data() + 1 + nx, nu));
  }
  if (times.size() < 2) throw std::runtime_error("trajectory too short");
  Trajectory traj;
  traj.dt = times[1] - times[0];
  traj.history_count = exact_ratio(tau, traj.dt, "Trajectory::from_csv");
  traj.t0 = times.front() + tau;
  traj.x.resize(nx, times.size());
  traj.u.resize(nu, times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    traj.x.col(j) = xs[j];
    traj.u.col(j) = us[j];
  }
  return traj;
}

namespace {

// History lookup during a step: stored samples up to column `filled`, plus
// the in-flight stage value (stage_t, stage_x) ahead of them.
struct StageHistory {
  const MatrixXd& x;
  double t_start;
  double dt;
  int filled;
  double stage_t;
  const VectorXd* stage_x;

  VectorXd at(double t) const {
    const double last_t = t_start + filled * dt;
    if (t >= last_t) {
      const double span = stage_t - last_t;
      if (span <= 0.0 || stage_x == nullptr) return x.col(filled);
      const double f = std::min(1.0, (t - last_t) / span);
      return (1.0 - f) * x.col(filled) + f * (*stage_x);
    }
    const double pos = (t - t_start) / dt;
    const int j0 = std::max(0, std::min(filled - 1, static_cast<int>(pos)));
    const double f = std::min(1.0, std::max(0.0, pos - j0));
    return (1.0 - f) * x.col(j0) + f * x.col(j0 + 1);
  }
};

VectorXd control_input(const std::optional<FeedbackLaw>& law,
                       const ExplorationSignal* expl, const StageHistory& hist,
                       double t, const VectorXd& xt0, int m) {
  VectorXd u = VectorXd::Zero(m);
  if (law) {
    u -= law->K0 * xt0;
    const int G = law->grid();
    const double h = law->tau / G;
    for (int g = 0; g <= G; ++g) {
      const double w = (g == 0 || g == G) ? 0.5 * h : h;
      const double theta = -law->tau + g * h;
      const VectorXd xv = (g == G) ? xt0 : hist.at(t + theta);
      u -= w * (law->K1[g] * xv);
    }
  }
  if (expl != nullptr && !expl->empty()) u += expl->at(t);
  return u;
}

}  // namespace

Trajectory simulate(const DelaySystem& sys,
                    const std::optional<FeedbackLaw>& controller,
                    const ExplorationSignal* exploration,
                    const SegmentState& x0, double horizon, double dt,
                    const SimulateOptions& opts) {
  sys.validate();
  if (controller && std::abs(controller->tau - sys.tau) > 1e-12) {
    throw std::invalid_argument("simulate: controller tau mismatch");
  }
  const int r = exact_ratio(sys.tau, dt, "simulate");
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const int n = sys.n();
  const int m = sys.m();

  Trajectory traj;
  traj.dt = dt;
  traj.t0 = 0.0;
  traj.history_count = r;
  traj.x.resize(n, r + 1 + steps);
  traj.u.setZero(m, r + 1 + steps);

  const SegmentState hist0 = x0.resampled(r);
  traj.x.leftCols(r + 1) = hist0.samples();

  const auto deriv = [&](const StageHistory& hist, double t,
                         const VectorXd& xs, VectorXd& u_out) {
    u_out = control_input(controller, exploration, hist, t, xs, m);
    return (sys.A * xs + sys.Ad * hist.at(t - sys.tau) + sys.B * u_out)
        .eval();
  };

  VectorXd u_tmp(m);
  for (int k = 0; k < steps; ++k) {
    const int j = r + k;
    const double t = k * dt;
    const VectorXd xj = traj.x.col(j);

    StageHistory hist{traj.x, traj.t_start(), dt, j, t, nullptr};
    const VectorXd k1 = deriv(hist, t, xj, u_tmp);
    traj.u.col(j) = u_tmp;

    VectorXd xs = xj + 0.5 * dt * k1;
    hist.stage_t = t + 0.5 * dt;
    hist.stage_x = &xs;
    const VectorXd k2 = deriv(hist, t + 0.5 * dt, xs, u_tmp);

    xs = xj + 0.5 * dt * k2;
    const VectorXd k3 = deriv(hist, t + 0.5 * dt, xs, u_tmp);

    xs = xj + dt * k3;
    hist.stage_t = t + dt;
    const VectorXd k4 = deriv(hist, t + dt, xs, u_tmp);

    traj.x.col(j + 1) = xj + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!traj.x.col(j + 1).allFinite() ||
        traj.x.col(j + 1).cwiseAbs().maxCoeff() > opts.blowup_limit) {
      throw std::runtime_error(
          "simulate: state blow-up at t = " + std::to_string(t + dt) +
          " (|x| > " + std::to_string(opts.blowup_limit) +
          "); controller is likely inadmissible");
    }
  }
  // Input at the final sample.
  {
    const int j = r + steps;
    StageHistory hist{traj.x, traj.t_start(), dt, j, steps * dt, nullptr};
    traj.u.col(j) = control_input(controller, exploration, hist, steps * dt,
                                  traj.x.col(j), m);
  }
  return traj;
}

VectorXd eval_feedback(const FeedbackLaw& law, const SegmentState& xt) {
  if (law.K0.cols() != xt.n()) {
    throw std::invalid_argument("eval_feedback: shape mismatch");
  }
  const int G = law.grid();
  const double h = law.tau / G;
  VectorXd u = -(law.K0 * xt.head());
  for (int g = 0; g <= G; ++g) {
    const double w = (g == 0 || g == G) ? 0.5 * h : h;
    u -= w * (law.K1[g] * xt.at(-law.tau + g * h));
  }
  return u;
}

VectorXd eval_feedback_traj(const FeedbackLaw& law, const Trajectory& traj,
                            int j) {
  const int G = law.grid();
  const double h = law.tau / G;
  const double t = traj.time_at(j);
  VectorXd u = -(law.K0 * traj.x.col(j));
  for (int g = 0; g <= G; ++g) {
    const double w = (g == 0 || g == G) ? 0.5 * h : h;
    u -= w * (law.K1[g] * traj.x_at(t - law.tau + g * h));
  }
  return u;
}

SegmentState segment_at(const Trajectory& traj, int j, double tau, int grid) {
  MatrixXd s(traj.x.rows(), grid + 1);
  const double t = traj.time_at(j);
  for (int g = 0; g <= grid; ++g) {
    s.col(g) = traj.x_at(t - tau + g * tau / grid);
  }
  return SegmentState(tau, std::move(s));
}

SegmentState random_history(const HistorySpec& spec, std::uint64_t seed, int n,
                            double tau, int grid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(spec.freq_min, spec.freq_max);
  std::uniform_real_distribution<double> offset(spec.offset_min,
                                                spec.offset_max);
  MatrixXd s = MatrixXd::Zero(n, grid + 1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> w(spec.num_sines);
    for (auto& wi : w) wi = freq(rng);
    const double chi = offset(rng);
    for (int g = 0; g <= grid; ++g) {
      const double theta = -tau + g * tau / grid;
      double v = chi;
      for (double wi : w) v += spec.amplitude * std::sin(wi * theta);
      s(i, g) = v;
    }
  }
  return SegmentState(tau, std::move(s));
}

Trajectory add_measurement_noise(const Trajectory& traj, double sigma,
                                 std::uint64_t seed) {
  if (sigma < 0.0) {
    throw std::invalid_argument("add_measurement_noise: sigma must be >= 0");
  }
  Trajectory noisy = traj;
  if (sigma == 0.0) return noisy;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (int j = 0; j < noisy.total(); ++j) {
    for (int i = 0; i < noisy.x.rows(); ++i) noisy.x(i, j) += gauss(rng);
  }
  return noisy;
}

double fit_decay_rate(const Trajectory& traj) {
  // Envelope fit: peak norm per window, linear regression of the log.
  const int first = traj.history_count;
  const int count = traj.total() - first;
  const int windows = std::min(20, std::max(2, count / 50));
  const int per = count / windows;
  std::vector<double> ts, ys;
  for (int w = 0; w < windows; ++w) {
    double peak = 0.0;
    for (int j = first + w * per; j < first + (w + 1) * per; ++j) {
      peak = std::max(peak, traj.x.col(j).norm());
    }
    if (peak <= 0.0) peak = 1e-300;
    ts.push_back(traj.time_at(first + w * per + per / 2));
    ys.push_back(std::log(peak));
  }
  const int k = static_cast<int>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int i = 0; i < k; ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double slope = (k * sty - st * sy) / (k * stt - st * st);
  return -slope;
}

}  // namespace delayadp

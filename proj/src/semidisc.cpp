#include "delayadp/semidisc.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace delayadp::semidisc {

AugmentedSystem semidiscretize(const DelaySystem& sys, double dt_d) {
  sys.validate();
  const double ratio = sys.tau / dt_d;
  const int r = static_cast<int>(std::lround(ratio));
  if (r < 1 || std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("semidiscretize: tau/dt_d must be an integer");
  }
  const int n = sys.n();
  const int m = sys.m();

  // E = exp(A dt), F = int_0^dt exp(As) ds via the augmented exponential
  // exp([[A, I], [0, 0]] dt): the top-right block is F.
  MatrixXd aug = MatrixXd::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = sys.A;
  aug.topRightCorner(n, n) = MatrixXd::Identity(n, n);
  const MatrixXd expm = (aug * dt_d).exp();
  const MatrixXd E = expm.topLeftCorner(n, n);
  const MatrixXd F = expm.topRightCorner(n, n);

  AugmentedSystem out;
  out.dt = dt_d;
  out.r = r;
  out.n = n;
  const int dim = n * (r + 1);
  out.Abar = MatrixXd::Zero(dim, dim);
  out.Bbar = MatrixXd::Zero(dim, m);
  out.Abar.topLeftCorner(n, n) = E;
  out.Abar.block(0, r * n, n, n) += F * sys.Ad;
  out.Bbar.topRows(n) = F * sys.B;
  for (int i = 1; i <= r; ++i) {
    out.Abar.block(i * n, (i - 1) * n, n, n) = MatrixXd::Identity(n, n);
  }
  return out;
}

MatrixXd lift_state_cost(const AugmentedSystem& aug, const MatrixXd& Q) {
  MatrixXd Qbar = MatrixXd::Zero(aug.dim(), aug.dim());
  Qbar.topLeftCorner(aug.n, aug.n) = Q * aug.dt;
  return Qbar;
}

DlqrResult dlqr(const AugmentedSystem& aug, const MatrixXd& Qbar,
                const MatrixXd& R, double tol, int max_iter) {
  const MatrixXd Rd = R * aug.dt;
  MatrixXd P = Qbar;
  DlqrResult res;
  for (int it = 1; it <= max_iter; ++it) {
    const MatrixXd BtP = aug.Bbar.transpose() * P;
    const MatrixXd S = Rd + BtP * aug.Bbar;
    const MatrixXd K = S.llt().solve(BtP * aug.Abar);
    const MatrixXd Pn = aug.Abar.transpose() * P * (aug.Abar - aug.Bbar * K) + Qbar;
    const double change = (Pn - P).cwiseAbs().maxCoeff() /
                          std::max(Pn.cwiseAbs().maxCoeff(), 1e-30);
    P = Pn;
    if (change < tol) {
      res.P = P;
      res.gain = K;
      res.iterations = it;
      return res;
    }
  }
  throw std::runtime_error(
      "dlqr: Riccati recursion did not converge (unstabilizable?)");
}

MatrixXd discretize_law(const AugmentedSystem& aug, const FeedbackLaw& law) {
  const int m = static_cast<int>(law.K0.rows());
  MatrixXd Kd = MatrixXd::Zero(m, aug.dim());
  Kd.leftCols(aug.n) = law.K0;
  // Block j holds x(k - j), i.e. theta = -j dt.
  for (int j = 0; j <= aug.r; ++j) {
    const double w = (j == 0 || j == aug.r) ? 0.5 * aug.dt : aug.dt;
    Kd.block(0, j * aug.n, m, aug.n) += w * law.k1_at(-j * aug.dt);
  }
  return Kd;
}

MatrixXd policy_value_oracle(const AugmentedSystem& aug, const MatrixXd& Kd,
                             const MatrixXd& Qbar, const MatrixXd& R) {
  MatrixXd Acl = aug.Abar - aug.Bbar * Kd;
  if (spectral_radius_closed_loop(aug, Kd) >= 1.0) {
    throw std::runtime_error("policy_value_oracle: closed loop not stable");
  }
  // Doubling iteration for P = Acl'P Acl + C: exact after ~60 squarings.
  MatrixXd P = Qbar + Kd.transpose() * (R * aug.dt) * Kd;
  for (int it = 0; it < 64; ++it) {
    const MatrixXd Pn = P + Acl.transpose() * P * Acl;
    const MatrixXd Acl2 = Acl * Acl;
    if ((Pn - P).cwiseAbs().maxCoeff() <
        1e-14 * std::max(1.0, Pn.cwiseAbs().maxCoeff())) {
      return Pn;
    }
    P = Pn;
    Acl = Acl2;
  }
  return P;
}

double oracle_value(const AugmentedSystem& aug, const MatrixXd& P,
                    const SegmentState& x0) {
  VectorXd xd(aug.dim());
  for (int j = 0; j <= aug.r; ++j) {
    xd.segment(j * aug.n, aug.n) = x0.at(-j * aug.dt);
  }
  return xd.dot(P * xd);
}

double spectral_radius_closed_loop(const AugmentedSystem& aug,
                                   const MatrixXd& Kd) {
  const MatrixXd Acl = aug.Abar - aug.Bbar * Kd;
  return Acl.eigenvalues().cwiseAbs().maxCoeff();
}

double closed_loop_radius(const DelaySystem& sys, const FeedbackLaw& law,
                          double dt_d) {
  const AugmentedSystem aug = semidiscretize(sys, dt_d);
  return spectral_radius_closed_loop(aug, discretize_law(aug, law));
}

double continuous_cost_sampled(const DelaySystem& sys,
                               const AugmentedSystem& aug, const MatrixXd& Kd,
                               const SegmentState& x0, const MatrixXd& Q,
                               const MatrixXd& R, double horizon, double dt) {
  const double ratio = aug.dt / dt;
  const int hold = static_cast<int>(std::lround(ratio));
  if (hold < 1 || std::abs(ratio - hold) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("continuous_cost_sampled: dt must divide dt_d");
  }
  const double dratio = sys.tau / dt;
  const int delay_steps = static_cast<int>(std::lround(dratio));
  if (std::abs(dratio - delay_steps) > 1e-9 * std::max(1.0, dratio)) {
    throw std::invalid_argument("continuous_cost_sampled: dt must divide tau");
  }
  const int n = sys.n();
  const int steps = static_cast<int>(std::lround(horizon / dt));

  // Dense state history at step dt; columns 0..delay_steps hold the initial
  // segment, column delay_steps is x(0).
  MatrixXd hist(n, delay_steps + steps + 1);
  for (int j = 0; j <= delay_steps; ++j) {
    hist.col(j) = x0.at(-sys.tau + j * dt);
  }

  auto delayed = [&](double t_index) {
    // Linear interpolation of the stored history at fractional index.
    const int lo = static_cast<int>(std::floor(t_index));
    const double frac = t_index - lo;
    if (frac == 0.0) return VectorXd(hist.col(lo));
    return VectorXd((1.0 - frac) * hist.col(lo) + frac * hist.col(lo + 1));
  };

  VectorXd u = VectorXd::Zero(sys.m());
  double cost = 0.0;
  double prev_g = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const int col = delay_steps + k;
    const VectorXd x = hist.col(col);
    if (k % hold == 0) {
      // Sample the augmented state at multiples of dt_d.
      VectorXd xd(aug.dim());
      for (int j = 0; j <= aug.r; ++j) {
        xd.segment(j * aug.n, aug.n) = hist.col(col - j * hold);
      }
      u = -Kd * xd;
    }
    const double g = x.dot(Q * x) + u.dot(R * u);
    if (k > 0) cost += 0.5 * dt * (prev_g + g);
    prev_g = g;
    if (!std::isfinite(g) || g > 1e24) {
      throw std::runtime_error("continuous_cost_sampled: trajectory blow-up");
    }
    if (k == steps) break;

    // RK4 step; the delayed argument lies at least dt in the past.
    const VectorXd bu = sys.B * u;
    auto f = [&](const VectorXd& xi, double stage_index) {
      return VectorXd(sys.A * xi + sys.Ad * delayed(stage_index - delay_steps) +
                      bu);
    };
    const double s0 = static_cast<double>(col);
    const VectorXd k1 = f(x, s0);
    const VectorXd k2 = f(x + 0.5 * dt * k1, s0 + 0.5);
    const VectorXd k3 = f(x + 0.5 * dt * k2, s0 + 0.5);
    const VectorXd k4 = f(x + dt * k3, s0 + 1.0);
    hist.col(col + 1) = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return cost;
}

}  // namespace delayadp::semidisc

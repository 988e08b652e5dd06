#pragma once

#include "delayadp/dde_sim.hpp"

// Semi-discretization baseline: the delay plant becomes a discrete-time
// delay-free system with augmented state x_d(k) = [x(k); x(k-1); ...;
// x(k-r)], r = tau/dt_d.  Used both as a comparison controller (DLQR) and as
// an independent oracle for policy values and closed-loop stability.
namespace delayadp::semidisc {

struct AugmentedSystem {
  MatrixXd Abar;  // n(r+1) x n(r+1)
  MatrixXd Bbar;  // n(r+1) x m
  double dt = 0.0;
  int r = 0;  // delay steps
  int n = 0;  // plant state dimension

  int dim() const { return n * (r + 1); }
};

// Exact zero-order-hold on the current block; the delayed term is held at
// the oldest stored sample over each step.
AugmentedSystem semidiscretize(const DelaySystem& sys, double dt_d);

// State cost lifted onto the augmented state: Q*dt on the current block.
MatrixXd lift_state_cost(const AugmentedSystem& aug, const MatrixXd& Q);

struct DlqrResult {
  MatrixXd gain;  // m x dim
  MatrixXd P;     // stationary Riccati solution
  int iterations = 0;
};

// Stationary discrete LQR via Riccati recursion to a fixed point.
DlqrResult dlqr(const AugmentedSystem& aug, const MatrixXd& Qbar,
                const MatrixXd& R, double tol = 1e-10, int max_iter = 100000);

// Continuous law sampled onto the augmented state: K0 on the current block,
// K1 integrated against each history block by trapezoid.
MatrixXd discretize_law(const AugmentedSystem& aug, const FeedbackLaw& law);

// Discrete Lyapunov value of a fixed discretized law:
// P = Acl'P Acl + Qbar + Kd'(R dt)Kd.  Requires spectral radius < 1.
MatrixXd policy_value_oracle(const AugmentedSystem& aug, const MatrixXd& Kd,
                             const MatrixXd& Qbar, const MatrixXd& R);

// x_d' P x_d for the history sampled on the augmented grid.
double oracle_value(const AugmentedSystem& aug, const MatrixXd& P,
                    const SegmentState& x0);

double spectral_radius_closed_loop(const AugmentedSystem& aug,
                                   const MatrixXd& Kd);

// Spectral radius of the semi-discretized closed loop under a continuous
// law; the empirical admissibility check.
double closed_loop_radius(const DelaySystem& sys, const FeedbackLaw& law,
                          double dt_d);

// Quadratic cost of the sampled-data controller u(t) = -Kd x_d(k) (held over
// [k dt_d, (k+1) dt_d)) on the continuous plant, integrated by RK4 at step dt
// and trapezoid in the cost.  dt must divide dt_d and tau.
double continuous_cost_sampled(const DelaySystem& sys,
                               const AugmentedSystem& aug, const MatrixXd& Kd,
                               const SegmentState& x0, const MatrixXd& Q,
                               const MatrixXd& R, double horizon, double dt);

}  // namespace delayadp::semidisc

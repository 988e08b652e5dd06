#pragma once

#include <string>
#include <vector>

#include "delayadp/dde_sim.hpp"

// Quadratic value functionals V(x0) = x(0)'P0 x(0)
//   + 2 x(0)' int P1(theta) x0(theta) dtheta
//   + int int x0(xi)' P2(xi,theta) x0(theta) dxi dtheta,
// with the kernels stored on a uniform theta grid.
namespace delayadp {

class ValueKernel {
 public:
  ValueKernel() = default;
  // P1: G+1 matrices; P2: (G+1)x(G+1) grid stored row-major (index
  // a*(G+1)+b holds P2 at (xi_a, theta_b)).
  ValueKernel(double tau, MatrixXd P0, std::vector<MatrixXd> P1,
              std::vector<MatrixXd> P2);

  double tau() const { return tau_; }
  int n() const { return static_cast<int>(P0_.rows()); }
  int grid() const { return static_cast<int>(P1_.size()) - 1; }
  double spacing() const { return tau_ / grid(); }

  const MatrixXd& P0() const { return P0_; }
  const MatrixXd& P1(int g) const { return P1_[g]; }
  const MatrixXd& P2(int a, int b) const { return P2_[a * (grid() + 1) + b]; }
  const std::vector<MatrixXd>& P1_nodes() const { return P1_; }
  const std::vector<MatrixXd>& P2_grid() const { return P2_; }

  // Checks P0 symmetry and P2(xi,theta)' = P2(theta,xi) on the grid.
  void validate(double rel_tol = 1e-9) const;

  std::string to_json() const;
  static ValueKernel from_json(const std::string& text);

 private:
  double tau_ = 0.0;
  MatrixXd P0_;
  std::vector<MatrixXd> P1_;
  std::vector<MatrixXd> P2_;
};

enum class QuadratureRule { Trapezoid, Simpson };

// Composite quadrature weights for G+1 uniform nodes with spacing h.
// Simpson requires even G and falls back to trapezoid otherwise.
std::vector<double> quadrature_weights(int grid, double h,
                                       QuadratureRule rule);

// V(x0) with both integrals by composite quadrature on the kernel grid.
double eval_value(const ValueKernel& V, const SegmentState& x0,
                  QuadratureRule rule = QuadratureRule::Trapezoid);

struct CostResult {
  double cost = 0.0;           // truncated integral over [0, horizon]
  double tail_estimate = 0.0;  // integrand(horizon) / fitted decay rate
};

// Closed-loop quadratic cost of `law` from history x0, integrated by
// composite trapezoid over time.  Throws on blow-up (inadmissible law).
CostResult eval_cost(const DelaySystem& sys, const FeedbackLaw& law,
                     const SegmentState& x0, const MatrixXd& Q,
                     const MatrixXd& R, double horizon, double dt);

// Max |dV/dt - rhs| / max |rhs| along the trajectory, where rhs is
//   -x'Qx - u_i'Ru_i + 2 u_{i+1}'R u_i - 2 u'R u_{i+1}
// and dV/dt is a central finite difference of eval_value.
double check_vdot_identity(const DelaySystem& sys, const ValueKernel& Vi,
                           const FeedbackLaw& law_i,
                           const FeedbackLaw& law_ip1, const Trajectory& traj,
                           const MatrixXd& Q, const MatrixXd& R,
                           int num_checkpoints = 50);

}  // namespace delayadp

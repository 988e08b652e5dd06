#pragma once

#include <vector>

#include "delayadp/value_kernel.hpp"

// Model-based policy iteration for the delay plant: policy evaluation solves
// the coupled algebraic / ODE / transport-PDE system for (P0, P1, P2) by grid
// collocation and one global sparse least-squares solve; policy improvement
// is K0 = R^-1 B' P0, K1(theta) = R^-1 B' P1(theta).
namespace delayadp::model_pi {

struct EvaluationResult {
  ValueKernel kernel;
  double residual = 0.0;  // relative residual of the collocation solve
};

// Solves the policy-evaluation PDE system for the closed loop under law_i.
// Throws std::runtime_error when the solve fails or produces non-finite
// values (inadmissible law).
EvaluationResult policy_evaluation(const DelaySystem& sys, const MatrixXd& Q,
                                   const MatrixXd& R, const FeedbackLaw& law_i,
                                   int grid);

FeedbackLaw policy_improvement(const ValueKernel& V, const MatrixXd& B,
                               const MatrixXd& R);

struct Iterate {
  ValueKernel kernel;
  FeedbackLaw law;        // improved law computed from this kernel
  double solve_residual = 0.0;
  double gain_delta = 0.0;  // sup-norm change of (K0, K1) vs previous law
};

struct ModelPiOptions {
  int grid = 100;
  double tol_delta = 1e-6;
  int max_iter = 30;
  bool check_admissibility = true;  // simulate law_1 and require decay
};

// Alternates evaluation / improvement from law_1 until the gain change drops
// below tol_delta.  Returns the full iterate history (kernel i, law i+1).
std::vector<Iterate> run(const DelaySystem& sys, const MatrixXd& Q,
                         const MatrixXd& R, const FeedbackLaw& law_1,
                         const ModelPiOptions& opts = {});

// Max normalized residual of the optimal-kernel PDE system evaluated on the
// grid with the same discretizations as policy_evaluation, substituting
// K = R^-1 B' P.
double riccati_residual(const DelaySystem& sys, const MatrixXd& Q,
                        const MatrixXd& R, const ValueKernel& V);

// Sup-norm distance between the gains of two laws (same grid).
double gain_distance(const FeedbackLaw& a, const FeedbackLaw& b);

}  // namespace delayadp::model_pi

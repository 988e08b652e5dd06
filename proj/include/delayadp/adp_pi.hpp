#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "delayadp/basis.hpp"
#include "delayadp/value_kernel.hpp"

// Data-driven policy iteration: per-segment regression rows built from one
// exploratory trajectory, reused across all iterations (off-policy).  Each
// row realizes the integrated Lyapunov-difference identity
//   M_k Upsilon = Y_k
// with M_k = [dvecv(x), 2 dGamma_Phi, dGamma_Psi, dGamma_Lambda,
//             -2 G_xv, -2 G_Phixv].
namespace delayadp::adp_pi {

using basis::BasisSet;
using basis::WeightLayout;

struct SegmentBoundaries {
  std::vector<int> indices;  // L+1 trajectory sample indices, increasing

  int segments() const { return static_cast<int>(indices.size()) - 1; }
  // Uniform boundaries from t0 with `samples_per_segment` * dt long segments
  // covering `window` seconds.
  static SegmentBoundaries uniform(const Trajectory& traj, double window,
                                   int samples_per_segment);
  void validate(const Trajectory& traj) const;
};

struct RegressionData {
  MatrixXd M;
  VectorXd Y;
  std::vector<int> segment_of_row;

  void dump_csv(const std::string& path, const WeightLayout& lay) const;
};

// Quadrature rows for a single segment-state (grids per the basis tau).
VectorXd gamma_phi_xx(const SegmentState& xt, const BasisSet& basis);
VectorXd gamma_psi_xx(const SegmentState& xt, const BasisSet& basis);
VectorXd gamma_lambda_xx(const SegmentState& xt, const BasisSet& basis);

// Time-quadrature rows over trajectory samples [j0, j1]; vhat holds
// v_i(t) = u(t) - u_i(x_t) for every trajectory sample.
VectorXd g_xv(const Trajectory& traj, int j0, int j1, const MatrixXd& vhat,
              const MatrixXd& R,
              QuadratureRule rule = QuadratureRule::Trapezoid);
VectorXd g_phi_xv(const Trajectory& traj, int j0, int j1, const MatrixXd& vhat,
                  const BasisSet& basis, const MatrixXd& R, int theta_grid,
                  QuadratureRule rule = QuadratureRule::Trapezoid);

struct AssembleOptions {
  int theta_grid = 100;  // quadrature grid for the theta integrals
  QuadratureRule rule = QuadratureRule::Trapezoid;  // theta and time
};

// Trajectory-only blocks (vecv and the three Gamma integrals) at every
// boundary; iteration independent, computed once and reused.
class GammaTable {
 public:
  GammaTable() = default;
  GammaTable(const Trajectory& traj, const SegmentBoundaries& bounds,
             const BasisSet& basis, const AssembleOptions& opts);
  const MatrixXd& rows() const { return rows_; }

 private:
  MatrixXd rows_;  // (L+1) x (n1 + Np n^2 + Ns n + Nl n2)
};

RegressionData assemble(const Trajectory& traj,
                        const SegmentBoundaries& bounds,
                        const FeedbackLaw& law_i, const BasisSet& basis,
                        const MatrixXd& Q, const MatrixXd& R,
                        const AssembleOptions& opts = {},
                        const GammaTable* cached_gamma = nullptr);

struct ExcitationResult {
  bool pass = false;
  double min_eig = 0.0;
};

// Assumption check: smallest eigenvalue of (1/L) M'M against alpha.
ExcitationResult excitation_check(const MatrixXd& M, double alpha);

struct ExcitationError : std::runtime_error {
  double min_eig;
  explicit ExcitationError(double eig)
      : std::runtime_error(
            "excitation condition failed (min eig " + std::to_string(eig) +
            "); collect more data: extend the trajectory window or enrich "
            "the exploration signal"),
        min_eig(eig) {}
};

struct SolveResult {
  VectorXd upsilon;
  double residual = 0.0;  // |M ups - Y| / |Y|
  int effective_rank = 0;
};

// Minimum-norm least squares via a rank-revealing orthogonal factorization.
// Directions below rank_threshold (relative to the largest pivot) are
// truncated instead of amplified; the weight vector is the minimum-norm
// solution on the retained subspace.
SolveResult solve_weights(const MatrixXd& M, const VectorXd& Y,
                          double rank_threshold = 1e-9);

struct DataPiOptions {
  double delta = 1e-3;
  int max_iter = 20;
  double alpha = 1e-8;
  // The polynomial feature Gram is numerically rank deficient on realistic
  // trajectories, so by default the excitation eigenvalue is only recorded
  // per iterate; strict mode turns a failed check into ExcitationError.
  bool strict_excitation = false;
  double rank_threshold = 1e-9;
  int theta_grid = 100;
  int law_grid = 100;  // grid of the reconstructed laws
  QuadratureRule rule = QuadratureRule::Trapezoid;
};

struct DataPiIterate {
  VectorXd upsilon;
  FeedbackLaw law;  // reconstructed improved law
  double residual = 0.0;
  double min_eig = 0.0;
  double upsilon_change = 0.0;
};

// Algorithm: iterate assemble -> excitation check -> least squares ->
// law reconstruction on the same trajectory until the Euclidean change of
// the weight vector drops below delta.
std::vector<DataPiIterate> run(const Trajectory& traj,
                               const SegmentBoundaries& bounds,
                               const FeedbackLaw& law_1, const BasisSet& basis,
                               const MatrixXd& Q, const MatrixXd& R,
                               const DataPiOptions& opts = {});

}  // namespace delayadp::adp_pi

#include "delayadp/adp_pi.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include <Eigen/Dense>

#include "delayadp/kernels.hpp"
#include "delayadp/veckit.hpp"

namespace delayadp::adp_pi {

namespace {

// Basis values tabulated on the quadrature grid: Phi per node, Psi and
// Lambda per node pair.  Data independent, shared by every boundary.
struct BasisTables {
  int grid = 0;
  double h = 0.0;
  std::vector<double> w;  // quadrature weights, grid+1
  MatrixXd phi;           // Np x (grid+1)
  MatrixXd psi_sym;       // Ns x pairs a<=b, weights and pair factor folded in
  MatrixXd lambda;        // Nl x (grid+1)^2, b-major columns (a*(G+1)+b)
  std::vector<std::pair<int, int>> sym_pairs;

  BasisTables(const BasisSet& basis, int grid_, QuadratureRule rule)
      : grid(grid_) {
    const double tau = basis.tau();
    h = tau / grid;
    w = quadrature_weights(grid, h, rule);
    const int nodes = grid + 1;
    phi.resize(basis.num_phi(), nodes);
    for (int g = 0; g < nodes; ++g) phi.col(g) = basis.phi(-tau + g * h);

    sym_pairs.reserve(nodes * (nodes + 1) / 2);
    for (int a = 0; a < nodes; ++a) {
      for (int b = a; b < nodes; ++b) sym_pairs.emplace_back(a, b);
    }
    psi_sym.resize(basis.num_psi(), static_cast<Eigen::Index>(sym_pairs.size()));
    for (std::size_t c = 0; c < sym_pairs.size(); ++c) {
      const auto [a, b] = sym_pairs[c];
      const double factor = (a == b ? 1.0 : 2.0) * w[a] * w[b];
      psi_sym.col(static_cast<Eigen::Index>(c)) =
          factor * basis.psi(-tau + a * h, -tau + b * h);
    }
    lambda.resize(basis.num_lambda(),
                  static_cast<Eigen::Index>(nodes) * nodes);
    for (int a = 0; a < nodes; ++a) {
      for (int b = 0; b < nodes; ++b) {
        lambda.col(static_cast<Eigen::Index>(a) * nodes + b) =
            w[a] * w[b] * basis.lambda(-tau + a * h, -tau + b * h);
      }
    }
  }
};

VectorXd gamma_row(const SegmentState& xt, const BasisSet& basis,
                   const BasisTables& tab, const WeightLayout& lay) {
  const int n = xt.n();
  const int nodes = tab.grid + 1;
  const MatrixXd& X = xt.samples();
  const VectorXd head = xt.head();

  VectorXd row = VectorXd::Zero(lay.n1() + n * n * lay.num_phi +
                                n * lay.num_psi + lay.n2() * lay.num_lambda);
  row.head(lay.n1()) = veckit::vecv(head);

  // Gamma_Phi: blocks p of int phi_p(theta) (x_t(theta) (x) x(t)) dtheta.
  double* phi_part = row.data() + lay.n1();
  VectorXd outer(n * n);
  for (int g = 0; g < nodes; ++g) {
    outer.setZero();
    kernels::kron_axpy(tab.w[g], X.col(g).data(), n, head.data(), n,
                       outer.data());
    kernels::kron_axpy(1.0, tab.phi.col(g).data(), lay.num_phi, outer.data(),
                       n * n, phi_part);
  }

  // Gamma_Psi: the diagonal double integral.  vecd is symmetric under the
  // pair swap, so only pairs a<=b are visited (factor folded into psi_sym).
  const auto pairs = static_cast<Eigen::Index>(tab.sym_pairs.size());
  MatrixXd D(n, pairs);
  for (Eigen::Index c = 0; c < pairs; ++c) {
    const auto [a, b] = tab.sym_pairs[static_cast<std::size_t>(c)];
    kernels::hadamard(X.col(a).data(), X.col(b).data(), D.col(c).data(),
                      static_cast<std::size_t>(n));
  }
  MatrixXd psi_mat = D * tab.psi_sym.transpose();  // n x Ns
  row.segment(lay.n1() + n * n * lay.num_phi, n * lay.num_psi) =
      veckit::vec(psi_mat);

  // Gamma_Lambda: strictly-upper pairs, not symmetric, full pair loop.
  if (lay.n2() > 0) {
    MatrixXd Dp(lay.n2(), static_cast<Eigen::Index>(nodes) * nodes);
    for (int a = 0; a < nodes; ++a) {
      for (int b = 0; b < nodes; ++b) {
        double* col = Dp.col(static_cast<Eigen::Index>(a) * nodes + b).data();
        int q = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) col[q++] = X(i, a) * X(j, b);
        }
      }
    }
    MatrixXd lam_mat = Dp * tab.lambda.transpose();  // n2 x Nl
    row.segment(lay.n1() + n * n * lay.num_phi + n * lay.num_psi,
                lay.n2() * lay.num_lambda) = veckit::vec(lam_mat);
  }
  return row;
}

std::vector<double> time_weights(int j0, int j1, double dt,
                                 QuadratureRule rule) {
  return quadrature_weights(j1 - j0, dt, rule);
}

// K1 of `law` resampled onto the quadrature grid by linear interpolation,
// with the node weights folded in; u_hat(t) is then
// -K0 x(t) - sum_g K1w[g] x(t + theta_g).
std::vector<MatrixXd> law_k1_on_grid(const FeedbackLaw& law, int theta_grid,
                                     QuadratureRule rule) {
  const double tau = law.tau;
  const double h = tau / theta_grid;
  const auto wq = quadrature_weights(theta_grid, h, rule);
  const int G = law.grid();
  std::vector<MatrixXd> out(static_cast<std::size_t>(theta_grid) + 1);
  for (int g = 0; g <= theta_grid; ++g) {
    const double pos = static_cast<double>(g) * G / theta_grid;
    const int lo = std::min(static_cast<int>(pos), G - 1);
    const double frac = pos - lo;
    out[static_cast<std::size_t>(g)] =
        wq[static_cast<std::size_t>(g)] *
        ((1.0 - frac) * law.K1[static_cast<std::size_t>(lo)] +
         frac * law.K1[static_cast<std::size_t>(lo) + 1]);
  }
  return out;
}

}  // namespace

SegmentBoundaries SegmentBoundaries::uniform(const Trajectory& traj,
                                             double window,
                                             int samples_per_segment) {
  if (samples_per_segment < 1) {
    throw std::invalid_argument("SegmentBoundaries: samples_per_segment < 1");
  }
  const int segments =
      static_cast<int>(std::floor(window / traj.dt / samples_per_segment + 0.5));
  if (segments < 1) {
    throw std::invalid_argument("SegmentBoundaries: window shorter than one segment");
  }
  SegmentBoundaries b;
  b.indices.resize(static_cast<std::size_t>(segments) + 1);
  for (int k = 0; k <= segments; ++k) {
    b.indices[static_cast<std::size_t>(k)] =
        traj.history_count + k * samples_per_segment;
  }
  if (b.indices.back() >= traj.total()) {
    throw std::invalid_argument("SegmentBoundaries: window exceeds trajectory");
  }
  return b;
}

void SegmentBoundaries::validate(const Trajectory& traj) const {
  if (indices.size() < 2) {
    throw std::invalid_argument("SegmentBoundaries: need at least one segment");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < traj.history_count || indices[k] >= traj.total()) {
      throw std::invalid_argument("SegmentBoundaries: index outside trajectory");
    }
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw std::invalid_argument("SegmentBoundaries: indices not increasing");
    }
  }
}

VectorXd gamma_phi_xx(const SegmentState& xt, const BasisSet& basis) {
  const WeightLayout lay(xt.n(), 1, basis);
  const BasisTables tab(basis, xt.grid(), QuadratureRule::Trapezoid);
  VectorXd row = gamma_row(xt, basis, tab, lay);
  return row.segment(lay.n1(), xt.n() * xt.n() * lay.num_phi);
}

VectorXd gamma_psi_xx(const SegmentState& xt, const BasisSet& basis) {
  const WeightLayout lay(xt.n(), 1, basis);
  const BasisTables tab(basis, xt.grid(), QuadratureRule::Trapezoid);
  VectorXd row = gamma_row(xt, basis, tab, lay);
  return row.segment(lay.n1() + xt.n() * xt.n() * lay.num_phi,
                     xt.n() * lay.num_psi);
}

VectorXd gamma_lambda_xx(const SegmentState& xt, const BasisSet& basis) {
  const WeightLayout lay(xt.n(), 1, basis);
  const BasisTables tab(basis, xt.grid(), QuadratureRule::Trapezoid);
  VectorXd row = gamma_row(xt, basis, tab, lay);
  return row.tail(lay.n2() * lay.num_lambda);
}

VectorXd g_xv(const Trajectory& traj, int j0, int j1, const MatrixXd& vhat,
              const MatrixXd& R, QuadratureRule rule) {
  const int n = static_cast<int>(traj.x.rows());
  const int m = static_cast<int>(R.rows());
  VectorXd row = VectorXd::Zero(n * m);
  const auto wt = time_weights(j0, j1, traj.dt, rule);
  VectorXd rv(m);
  for (int j = j0; j <= j1; ++j) {
    rv.noalias() = R * vhat.col(j);
    kernels::kron_axpy(wt[static_cast<std::size_t>(j - j0)],
                       traj.x.col(j).data(), n, rv.data(), m, row.data());
  }
  return row;
}

VectorXd g_phi_xv(const Trajectory& traj, int j0, int j1, const MatrixXd& vhat,
                  const BasisSet& basis, const MatrixXd& R, int theta_grid,
                  QuadratureRule rule) {
  const int n = static_cast<int>(traj.x.rows());
  const int m = static_cast<int>(R.rows());
  const int np = basis.num_phi();
  const double tau = basis.tau();
  const double h = tau / theta_grid;
  const auto wq = quadrature_weights(theta_grid, h, rule);
  MatrixXd phi_tab(np, theta_grid + 1);
  for (int g = 0; g <= theta_grid; ++g) phi_tab.col(g) = basis.phi(-tau + g * h);

  VectorXd row = VectorXd::Zero(np * n * m);
  const auto wt = time_weights(j0, j1, traj.dt, rule);
  VectorXd rv(m), z(n), inner(n * m);
  for (int j = j0; j <= j1; ++j) {
    rv.noalias() = R * vhat.col(j);
    const double t = traj.time_at(j);
    const double w_time = wt[static_cast<std::size_t>(j - j0)];
    for (int g = 0; g <= theta_grid; ++g) {
      z = traj.x_at(t - tau + g * h);
      inner.setZero();
      kernels::kron_axpy(w_time * wq[static_cast<std::size_t>(g)], z.data(), n,
                         rv.data(), m, inner.data());
      kernels::kron_axpy(1.0, phi_tab.col(g).data(), np, inner.data(), n * m,
                         row.data());
    }
  }
  return row;
}

GammaTable::GammaTable(const Trajectory& traj, const SegmentBoundaries& bounds,
                       const BasisSet& basis, const AssembleOptions& opts) {
  bounds.validate(traj);
  const int n = static_cast<int>(traj.x.rows());
  const WeightLayout lay(n, 1, basis);
  const BasisTables tab(basis, opts.theta_grid, opts.rule);
  const auto count = static_cast<Eigen::Index>(bounds.indices.size());
  rows_.resize(count, lay.n1() + n * n * lay.num_phi + n * lay.num_psi +
                          lay.n2() * lay.num_lambda);
  for (Eigen::Index k = 0; k < count; ++k) {
    const SegmentState xt = segment_at(
        traj, bounds.indices[static_cast<std::size_t>(k)], basis.tau(),
        opts.theta_grid);
    rows_.row(k) = gamma_row(xt, basis, tab, lay).transpose();
  }
}

RegressionData assemble(const Trajectory& traj,
                        const SegmentBoundaries& bounds,
                        const FeedbackLaw& law_i, const BasisSet& basis,
                        const MatrixXd& Q, const MatrixXd& R,
                        const AssembleOptions& opts,
                        const GammaTable* cached_gamma) {
  bounds.validate(traj);
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(R.rows());
  const WeightLayout lay(n, m, basis);
  const int L = bounds.segments();

  GammaTable local;
  if (cached_gamma == nullptr) {
    local = GammaTable(traj, bounds, basis, opts);
    cached_gamma = &local;
  }
  const MatrixXd& gamma = cached_gamma->rows();
  if (gamma.rows() != L + 1) {
    throw std::invalid_argument("assemble: gamma table does not match boundaries");
  }

  // Law-dependent samples: u_hat and v_hat on the learning window.  The K1
  // integral reuses the theta quadrature grid so its error matches the
  // Gamma blocks rather than the coarser law grid.
  const int j_first = bounds.indices.front();
  const int j_last = bounds.indices.back();
  const auto k1w = law_k1_on_grid(law_i, opts.theta_grid, opts.rule);
  const double tau = law_i.tau;
  const double h = tau / opts.theta_grid;
  MatrixXd vhat = MatrixXd::Zero(m, traj.total());
  VectorXd qcost = VectorXd::Zero(traj.total());
  for (int j = j_first; j <= j_last; ++j) {
    const double t = traj.time_at(j);
    VectorXd uhat = -(law_i.K0 * traj.x.col(j));
    for (int g = 0; g <= opts.theta_grid; ++g) {
      uhat.noalias() -=
          k1w[static_cast<std::size_t>(g)] * traj.x_at(t - tau + g * h);
    }
    vhat.col(j) = traj.u.col(j) - uhat;
    const VectorXd xj = traj.x.col(j);
    qcost[j] = xj.dot(Q * xj) + uhat.dot(R * uhat);
  }

  RegressionData data;
  data.M.resize(L, lay.total());
  data.Y.resize(L);
  data.segment_of_row.resize(static_cast<std::size_t>(L));

  const int gamma_width = static_cast<int>(gamma.cols());
  for (int k = 0; k < L; ++k) {
    const int j0 = bounds.indices[static_cast<std::size_t>(k)];
    const int j1 = bounds.indices[static_cast<std::size_t>(k) + 1];
    VectorXd diff = (gamma.row(k + 1) - gamma.row(k)).transpose();
    diff.segment(lay.w1_offset(), n * n * lay.num_phi) *= 2.0;
    data.M.block(k, 0, 1, gamma_width) = diff.transpose();
    data.M.block(k, lay.u0_offset(), 1, n * m) =
        -2.0 * g_xv(traj, j0, j1, vhat, R, opts.rule).transpose();
    data.M.block(k, lay.u1_offset(), 1, n * m * lay.num_phi) =
        -2.0 * g_phi_xv(traj, j0, j1, vhat, basis, R, opts.theta_grid,
                        opts.rule)
                   .transpose();

    double y = 0.0;
    const auto wt = time_weights(j0, j1, traj.dt, opts.rule);
    for (int j = j0; j <= j1; ++j) {
      y += wt[static_cast<std::size_t>(j - j0)] * qcost[j];
    }
    data.Y[k] = -y;
    data.segment_of_row[static_cast<std::size_t>(k)] = k;
  }
  return data;
}

ExcitationResult excitation_check(const MatrixXd& M, double alpha) {
  const double L = static_cast<double>(M.rows());
  MatrixXd gram = M.transpose() * M / L;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("excitation_check: eigensolver failed");
  }
  ExcitationResult r;
  r.min_eig = eig.eigenvalues().minCoeff();
  r.pass = r.min_eig >= alpha;
  return r;
}

SolveResult solve_weights(const MatrixXd& M, const VectorXd& Y,
                          double rank_threshold) {
  if (M.rows() != Y.size() || M.rows() == 0) {
    throw std::invalid_argument("solve_weights: dimension mismatch");
  }
  Eigen::BDCSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rank_threshold);
  SolveResult r;
  r.upsilon = svd.solve(Y);
  r.effective_rank = static_cast<int>(svd.rank());
  const double scale = std::max(Y.norm(), 1e-300);
  r.residual = (M * r.upsilon - Y).norm() / scale;
  return r;
}

std::vector<DataPiIterate> run(const Trajectory& traj,
                               const SegmentBoundaries& bounds,
                               const FeedbackLaw& law_1, const BasisSet& basis,
                               const MatrixXd& Q, const MatrixXd& R,
                               const DataPiOptions& opts) {
  AssembleOptions aopts;
  aopts.theta_grid = opts.theta_grid;
  aopts.rule = opts.rule;
  const GammaTable gamma(traj, bounds, basis, aopts);

  std::vector<DataPiIterate> history;
  const WeightLayout lay(static_cast<int>(Q.rows()), static_cast<int>(R.rows()),
                         basis);
  FeedbackLaw law = law_1;
  VectorXd prev;
  for (int i = 0; i < opts.max_iter; ++i) {
    RegressionData data = assemble(traj, bounds, law, basis, Q, R, aopts, &gamma);
    const ExcitationResult exc = excitation_check(data.M, opts.alpha);
    if (opts.strict_excitation && !exc.pass) throw ExcitationError(exc.min_eig);
    SolveResult sol = solve_weights(data.M, data.Y, opts.rank_threshold);

    DataPiIterate it;
    it.upsilon = sol.upsilon;
    it.residual = sol.residual;
    it.min_eig = exc.min_eig;
    it.law = basis::reconstruct_law(sol.upsilon, lay, basis, opts.law_grid);
    it.upsilon_change = prev.size() == 0
                            ? std::numeric_limits<double>::infinity()
                            : (sol.upsilon - prev).norm();
    history.push_back(it);
    if (it.upsilon_change < opts.delta) break;
    prev = sol.upsilon;
    law = it.law;
  }
  return history;
}

void RegressionData::dump_csv(const std::string& path,
                              const WeightLayout& lay) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_csv: cannot open " + path);
  out << std::setprecision(17);
  for (int c = 0; c < lay.total(); ++c) {
    const char* block = "W0";
    int local = c;
    if (c >= lay.u1_offset()) {
      block = "U1";
      local = c - lay.u1_offset();
    } else if (c >= lay.u0_offset()) {
      block = "U0";
      local = c - lay.u0_offset();
    } else if (c >= lay.w3_offset()) {
      block = "W3";
      local = c - lay.w3_offset();
    } else if (c >= lay.w2_offset()) {
      block = "W2";
      local = c - lay.w2_offset();
    } else if (c >= lay.w1_offset()) {
      block = "W1";
      local = c - lay.w1_offset();
    }
    out << 'M' << '_' << block << '_' << local + 1 << ',';
  }
  out << "Y\n";
  for (Eigen::Index k = 0; k < M.rows(); ++k) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) out << M(k, c) << ',';
    out << Y[k] << '\n';
  }
}

}  // namespace delayadp::adp_pi

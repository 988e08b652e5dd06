#include "delayadp/model_pi.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "delayadp/veckit.hpp"

namespace delayadp::model_pi {

namespace {

using Eigen::SparseMatrix;
using Eigen::Triplet;

// Unknown layout for the collocation system: vecs-style upper triangle of P0,
// then full n x n blocks for every P1 node, then full blocks for every grid
// pair (a, b) with a <= b (the lower region is eliminated through
// P2(xi,theta)' = P2(theta,xi)).
struct Layout {
  int n;
  int grid;
  int p0_count;
  int p1_base;
  int p2_base;
  int cols;

  Layout(int n_, int grid_) : n(n_), grid(grid_) {
    p0_count = veckit::tri_count(n);
    p1_base = p0_count;
    p2_base = p1_base + (grid + 1) * n * n;
    cols = p2_base + pair_total() * n * n;
  }

  int pair_total() const { return (grid + 1) * (grid + 2) / 2; }

  int p0_index(int r, int c) const {
    const int i = std::min(r, c);
    const int j = std::max(r, c);
    return i * (2 * n - i - 1) / 2 + j;
  }
  int p1_index(int g, int r, int c) const {
    return p1_base + g * n * n + c * n + r;
  }
  // Linear index of the retained pair (a, b), a <= b.
  int pair_index(int a, int b) const {
    return a * (2 * (grid + 1) - a + 1) / 2 + (b - a);
  }
  int p2_index(int a, int b, int r, int c) const {
    if (a > b) {
      std::swap(a, b);
      std::swap(r, c);
    }
    return p2_base + pair_index(a, b) * n * n + c * n + r;
  }
};

struct Assembler {
  const Layout& lay;
  std::vector<Triplet<double>> trips;
  std::vector<double> rhs;
  int row = 0;

  explicit Assembler(const Layout& l) : lay(l) {}

  void add(int col, double coef) {
    if (coef != 0.0) trips.emplace_back(row, col, coef);
  }
  void finish_row(double b) {
    rhs.push_back(b);
    ++row;
  }
};

}  // namespace

EvaluationResult policy_evaluation(const DelaySystem& sys, const MatrixXd& Q,
                                   const MatrixXd& R, const FeedbackLaw& law_i,
                                   int grid) {
  sys.validate();
  if (grid < 2) throw std::invalid_argument("policy_evaluation: grid >= 2");
  if (law_i.grid() != grid) {
    throw std::invalid_argument("policy_evaluation: law grid mismatch");
  }
  const int n = sys.n();
  const int G = grid;
  const double h = sys.tau / G;
  const MatrixXd Ai = sys.A - sys.B * law_i.K0;
  const MatrixXd Qi = Q + law_i.K0.transpose() * R * law_i.K0;
  const Layout lay(n, G);
  Assembler as(lay);

  // Algebraic block: Ai'P0 + P0 Ai + Qi + P1(0-) + P1'(0-) = 0, upper
  // triangle only (the expression is symmetric).
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        as.add(lay.p0_index(k, j), Ai(k, i));   // (Ai'P0)[i,j]
        as.add(lay.p0_index(i, k), Ai(k, j));   // (P0 Ai)[i,j]
      }
      as.add(lay.p1_index(G, i, j), 1.0);
      as.add(lay.p1_index(G, j, i), 1.0);
      as.finish_row(-Qi(i, j));
    }
  }

  // P1 ODE at every node: dP1/dtheta - Ai'P1 + P0 B K1 - P2(0,theta)
  //   = K0'R K1(theta).
  // Central differences inside, one-sided second order at the ends.
  for (int g = 0; g <= G; ++g) {
    const MatrixXd BK1 = sys.B * law_i.K1[g];
    const MatrixXd rhs_const = law_i.K0.transpose() * R * law_i.K1[g];
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (g == 0) {
          as.add(lay.p1_index(0, r, c), -3.0 / (2.0 * h));
          as.add(lay.p1_index(1, r, c), 4.0 / (2.0 * h));
          as.add(lay.p1_index(2, r, c), -1.0 / (2.0 * h));
        } else if (g == G) {
          as.add(lay.p1_index(G, r, c), 3.0 / (2.0 * h));
          as.add(lay.p1_index(G - 1, r, c), -4.0 / (2.0 * h));
          as.add(lay.p1_index(G - 2, r, c), 1.0 / (2.0 * h));
        } else {
          as.add(lay.p1_index(g + 1, r, c), 1.0 / (2.0 * h));
          as.add(lay.p1_index(g - 1, r, c), -1.0 / (2.0 * h));
        }
        for (int k = 0; k < n; ++k) {
          as.add(lay.p1_index(g, k, c), -Ai(k, r));       // -(Ai'P1)[r,c]
          as.add(lay.p0_index(r, k), BK1(k, c));          // (P0 B K1)[r,c]
        }
        as.add(lay.p2_index(G, g, r, c), -1.0);
        as.finish_row(rhs_const(r, c));
      }
    }
  }

  // Transport PDE along the characteristic (1,1), midpoint right-hand side.
  // The printed RHS is symmetrized so the structural symmetry of P2 is an
  // exact invariant of the discrete system:
  //   S(xi,theta) = K1'(xi) R K1(theta) - K1'(xi) B' P1(theta)
  //                 - P1'(xi) B K1(theta).
  for (int a = 0; a < G; ++a) {
    const MatrixXd K1ma = 0.5 * (law_i.K1[a] + law_i.K1[a + 1]);
    const MatrixXd Ca = K1ma.transpose() * sys.B.transpose();  // n x n
    for (int b = a; b < G; ++b) {
      const MatrixXd K1mb = 0.5 * (law_i.K1[b] + law_i.K1[b + 1]);
      const MatrixXd Db = sys.B * K1mb;  // n x n
      const MatrixXd rhs_const = K1ma.transpose() * R * K1mb;
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          as.add(lay.p2_index(a + 1, b + 1, r, c), 1.0 / h);
          as.add(lay.p2_index(a, b, r, c), -1.0 / h);
          for (int k = 0; k < n; ++k) {
            // + K1m(a)' B' P1(mid b)
            as.add(lay.p1_index(b, k, c), 0.5 * Ca(r, k));
            as.add(lay.p1_index(b + 1, k, c), 0.5 * Ca(r, k));
            // + P1(mid a)' B K1m(b)
            as.add(lay.p1_index(a, k, r), 0.5 * Db(k, c));
            as.add(lay.p1_index(a + 1, k, r), 0.5 * Db(k, c));
          }
          as.finish_row(rhs_const(r, c));
        }
      }
    }
  }

  // Boundary: P1(-tau) = P0 Ad.
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      as.add(lay.p1_index(0, r, c), 1.0);
      for (int k = 0; k < n; ++k) {
        as.add(lay.p0_index(r, k), -sys.Ad(k, c));
      }
      as.finish_row(0.0);
    }
  }

  // Boundary: P2(-tau, theta) = Ad' P1(theta) at every node.
  for (int g = 0; g <= G; ++g) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        as.add(lay.p2_index(0, g, r, c), 1.0);
        for (int k = 0; k < n; ++k) {
          as.add(lay.p1_index(g, k, c), -sys.Ad(k, r));
        }
        as.finish_row(0.0);
      }
    }
  }

  SparseMatrix<double> A(as.row, lay.cols);
  A.setFromTriplets(as.trips.begin(), as.trips.end());
  const Eigen::Map<const VectorXd> b(as.rhs.data(), as.row);

  SparseMatrix<double> AtA = (A.transpose() * A).pruned();
  const VectorXd Atb = A.transpose() * b;
  Eigen::SimplicialLDLT<SparseMatrix<double>> solver(AtA);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("policy_evaluation: sparse factorization failed");
  }
  const VectorXd sol = solver.solve(Atb);
  if (!sol.allFinite()) {
    throw std::runtime_error(
        "policy_evaluation: non-finite solution (law inadmissible?)");
  }
  const double residual = (A * sol - b).norm() / std::max(b.norm(), 1e-30);

  // Reshape into the kernel, mirroring the symmetry-reduced blocks.
  MatrixXd P0(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) P0(r, c) = P0(c, r) = sol[lay.p0_index(r, c)];
  }
  std::vector<MatrixXd> P1(G + 1);
  for (int g = 0; g <= G; ++g) {
    P1[g].resize(n, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) P1[g](r, c) = sol[lay.p1_index(g, r, c)];
    }
  }
  std::vector<MatrixXd> P2((G + 1) * (G + 1));
  for (int a = 0; a <= G; ++a) {
    for (int bnode = 0; bnode <= G; ++bnode) {
      MatrixXd M(n, n);
      for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) M(r, c) = sol[lay.p2_index(a, bnode, r, c)];
      }
      P2[a * (G + 1) + bnode] = std::move(M);
    }
  }
  EvaluationResult res{ValueKernel(sys.tau, std::move(P0), std::move(P1),
                                   std::move(P2)),
                       residual};
  return res;
}

FeedbackLaw policy_improvement(const ValueKernel& V, const MatrixXd& B,
                               const MatrixXd& R) {
  Eigen::LLT<MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("policy_improvement: R must be positive definite");
  }
  FeedbackLaw law;
  law.tau = V.tau();
  law.K0 = llt.solve(B.transpose() * V.P0());
  law.K1.resize(V.grid() + 1);
  for (int g = 0; g <= V.grid(); ++g) {
    law.K1[g] = llt.solve(B.transpose() * V.P1(g));
  }
  return law;
}

double gain_distance(const FeedbackLaw& a, const FeedbackLaw& b) {
  double d = (a.K0 - b.K0).cwiseAbs().maxCoeff();
  for (std::size_t g = 0; g < a.K1.size(); ++g) {
    d = std::max(d, (a.K1[g] - b.K1[g]).cwiseAbs().maxCoeff());
  }
  return d;
}

std::vector<Iterate> run(const DelaySystem& sys, const MatrixXd& Q,
                         const MatrixXd& R, const FeedbackLaw& law_1,
                         const ModelPiOptions& opts) {
  if (opts.check_admissibility) {
    // Simulate the initial closed loop and require a decaying envelope.
    const int r = std::max(2, static_cast<int>(std::lround(sys.tau / 0.005)));
    const double dt = sys.tau / r;
    HistorySpec hs;
    hs.amplitude = 1.0;
    hs.num_sines = 5;
    hs.offset_min = -1.0;
    hs.offset_max = 1.0;
    const SegmentState x0 = random_history(hs, 12345, sys.n(), sys.tau, 64);
    const double horizon = std::max(20.0, 15.0 * sys.tau);
    const Trajectory traj = simulate(sys, law_1, nullptr, x0, horizon, dt);
    if (fit_decay_rate(traj) <= 0.0) {
      throw std::runtime_error(
          "run_model_pi: initial law fails the decay-envelope check");
    }
  }

  std::vector<Iterate> iterates;
  FeedbackLaw law = law_1;
  int residual_growth = 0;
  double prev_residual = -1.0;
  for (int i = 0; i < opts.max_iter; ++i) {
    EvaluationResult ev = policy_evaluation(sys, Q, R, law, opts.grid);
    if (prev_residual >= 0.0 && ev.residual > 2.0 * prev_residual &&
        ev.residual > 1e-4) {
      if (++residual_growth >= 3) {
        throw std::runtime_error(
            "run_model_pi: diverging (residual grew over 3 iterations)");
      }
    } else {
      residual_growth = 0;
    }
    prev_residual = ev.residual;

    Iterate it;
    it.solve_residual = ev.residual;
    it.law = policy_improvement(ev.kernel, sys.B, R);
    it.gain_delta = gain_distance(it.law, law);
    it.kernel = std::move(ev.kernel);
    law = it.law;
    iterates.push_back(std::move(it));
    if (iterates.back().gain_delta < opts.tol_delta) break;
  }
  return iterates;
}

double riccati_residual(const DelaySystem& sys, const MatrixXd& Q,
                        const MatrixXd& R, const ValueKernel& V) {
  const int n = sys.n();
  const int G = V.grid();
  const double h = V.spacing();
  const Eigen::LLT<MatrixXd> llt(R);
  const MatrixXd BRinvBt =
      sys.B * llt.solve(MatrixXd(sys.B.transpose()));

  const auto norm_or = [](const MatrixXd& M) {
    return M.cwiseAbs().maxCoeff();
  };
  double worst = 0.0;

  // Algebraic equation.
  {
    const MatrixXd res = sys.A.transpose() * V.P0() + V.P0() * sys.A -
                         V.P0() * BRinvBt * V.P0() + V.P1(G) +
                         V.P1(G).transpose() + Q;
    const double scale = std::max(
        {norm_or(sys.A.transpose() * V.P0()), norm_or(Q),
         norm_or(V.P0() * BRinvBt * V.P0()), norm_or(V.P1(G)), 1e-30});
    worst = std::max(worst, norm_or(res) / scale);
  }

  // P1 ODE with the same stencils.
  {
    double err = 0.0, scale = 1e-30;
    const MatrixXd At_closed = sys.A.transpose() - V.P0() * BRinvBt;
    for (int g = 0; g <= G; ++g) {
      MatrixXd d;
      if (g == 0) {
        d = (-3.0 * V.P1(0) + 4.0 * V.P1(1) - V.P1(2)) / (2.0 * h);
      } else if (g == G) {
        d = (3.0 * V.P1(G) - 4.0 * V.P1(G - 1) + V.P1(G - 2)) / (2.0 * h);
      } else {
        d = (V.P1(g + 1) - V.P1(g - 1)) / (2.0 * h);
      }
      const MatrixXd rhs = At_closed * V.P1(g) + V.P2(G, g);
      err = std::max(err, norm_or(d - rhs));
      scale = std::max({scale, norm_or(d), norm_or(rhs)});
    }
    worst = std::max(worst, err / scale);
  }

  // Transport PDE along (1,1) with midpoint right-hand side.
  {
    double err = 0.0, scale = 1e-30;
    for (int a = 0; a < G; ++a) {
      for (int b = 0; b < G; ++b) {
        const MatrixXd d = (V.P2(a + 1, b + 1) - V.P2(a, b)) / h;
        const MatrixXd P1ma = 0.5 * (V.P1(a) + V.P1(a + 1));
        const MatrixXd P1mb = 0.5 * (V.P1(b) + V.P1(b + 1));
        const MatrixXd rhs = -P1ma.transpose() * BRinvBt * P1mb;
        err = std::max(err, norm_or(d - rhs));
        scale = std::max({scale, norm_or(d), norm_or(rhs)});
      }
    }
    worst = std::max(worst, err / scale);
  }

  // Boundary conditions.
  {
    const MatrixXd res = V.P1(0) - V.P0() * sys.Ad;
    const double scale =
        std::max({norm_or(V.P1(0)), norm_or(V.P0() * sys.Ad), 1e-30});
    worst = std::max(worst, norm_or(res) / scale);
  }
  {
    double err = 0.0, scale = 1e-30;
    for (int g = 0; g <= G; ++g) {
      const MatrixXd rhs = sys.Ad.transpose() * V.P1(g);
      err = std::max(err, norm_or(V.P2(0, g) - rhs));
      scale = std::max({scale, norm_or(V.P2(0, g)), norm_or(rhs)});
    }
    worst = std::max(worst, err / scale);
  }
  return worst;
}

}  // namespace delayadp::model_pi

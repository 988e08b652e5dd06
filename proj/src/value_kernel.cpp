#include "delayadp/value_kernel.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "delayadp/veckit.hpp"

namespace delayadp {

using nlohmann::json;

ValueKernel::ValueKernel(double tau, MatrixXd P0, std::vector<MatrixXd> P1,
                         std::vector<MatrixXd> P2)
    : tau_(tau), P0_(std::move(P0)), P1_(std::move(P1)), P2_(std::move(P2)) {
  if (tau_ <= 0.0 || P1_.size() < 2 ||
      P2_.size() != P1_.size() * P1_.size()) {
    throw std::invalid_argument("ValueKernel: inconsistent grid sizes");
  }
}

void ValueKernel::validate(double rel_tol) const {
  if (!veckit::is_symmetric(P0_, rel_tol)) {
    throw std::invalid_argument("ValueKernel: P0 not symmetric");
  }
  const int G = grid();
  double scale = 0.0;
  for (const auto& M : P2_) scale = std::max(scale, M.cwiseAbs().maxCoeff());
  scale = std::max(scale, 1.0);
  for (int a = 0; a <= G; ++a) {
    for (int b = 0; b <= G; ++b) {
      const double err =
          (P2(a, b).transpose() - P2(b, a)).cwiseAbs().maxCoeff();
      if (err > rel_tol * scale) {
        throw std::invalid_argument(
            "ValueKernel: P2(xi,theta)' != P2(theta,xi) on the grid");
      }
    }
  }
}

namespace {

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.at(0).size());
  MatrixXd M(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) M(i, j) = rows.at(i).at(j).get<double>();
  }
  return M;
}

}  // namespace

std::string ValueKernel::to_json() const {
  json j;
  j["n"] = n();
  j["G"] = grid();
  j["tau"] = tau_;
  j["P0"] = matrix_to_json(P0_);
  json p1 = json::array();
  for (const auto& M : P1_) p1.push_back(matrix_to_json(M));
  j["P1"] = std::move(p1);
  json p2 = json::array();
  for (const auto& M : P2_) p2.push_back(matrix_to_json(M));
  j["P2"] = std::move(p2);
  return j.dump(2);
}

ValueKernel ValueKernel::from_json(const std::string& text) {
  const json j = json::parse(text);
  const int G = j.at("G").get<int>();
  std::vector<MatrixXd> p1, p2;
  for (const auto& m : j.at("P1")) p1.push_back(matrix_from_json(m));
  for (const auto& m : j.at("P2")) p2.push_back(matrix_from_json(m));
  if (static_cast<int>(p1.size()) != G + 1) {
    throw std::invalid_argument("ValueKernel::from_json: bad P1 grid");
  }
  return ValueKernel(j.at("tau").get<double>(), matrix_from_json(j.at("P0")),
                     std::move(p1), std::move(p2));
}

std::vector<double> quadrature_weights(int grid, double h,
                                       QuadratureRule rule) {
  std::vector<double> w(grid + 1, h);
  if (rule == QuadratureRule::Simpson && grid % 2 == 0 && grid >= 2) {
    for (int g = 0; g <= grid; ++g) {
      w[g] = (g == 0 || g == grid) ? h / 3.0
                                   : (g % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    }
    return w;
  }
  w[0] = w[grid] = 0.5 * h;
  return w;
}

double eval_value(const ValueKernel& V, const SegmentState& x0,
                  QuadratureRule rule) {
  if (x0.n() != V.n()) throw std::invalid_argument("eval_value: shape mismatch");
  const int G = V.grid();
  const SegmentState xs = (x0.grid() == G && std::abs(x0.tau() - V.tau()) < 1e-12)
                              ? x0
                              : x0.resampled(G);
  const auto w = quadrature_weights(G, V.spacing(), rule);
  const VectorXd x_head = xs.head();

  double value = x_head.dot(V.P0() * x_head);
  VectorXd p1term = VectorXd::Zero(V.n());
  for (int g = 0; g <= G; ++g) p1term += w[g] * (V.P1(g) * xs.samples().col(g));
  value += 2.0 * x_head.dot(p1term);
  for (int a = 0; a <= G; ++a) {
    const VectorXd xa = xs.samples().col(a);
    for (int b = 0; b <= G; ++b) {
      value += w[a] * w[b] * xa.dot(V.P2(a, b) * xs.samples().col(b));
    }
  }
  return value;
}

CostResult eval_cost(const DelaySystem& sys, const FeedbackLaw& law,
                     const SegmentState& x0, const MatrixXd& Q,
                     const MatrixXd& R, double horizon, double dt) {
  if (!veckit::is_symmetric(Q) || !veckit::is_symmetric(R)) {
    throw std::invalid_argument("eval_cost: Q and R must be symmetric");
  }
  const Trajectory traj = simulate(sys, law, nullptr, x0, horizon, dt);
  const int first = traj.history_count;
  double cost = 0.0;
  double g_last = 0.0;
  for (int j = first; j < traj.total(); ++j) {
    const VectorXd x = traj.x.col(j);
    const VectorXd u = traj.u.col(j);
    const double g = x.dot(Q * x) + u.dot(R * u);
    const bool edge = (j == first || j == traj.total() - 1);
    cost += (edge ? 0.5 : 1.0) * dt * g;
    g_last = g;
  }
  CostResult res;
  res.cost = cost;
  const double lambda = fit_decay_rate(traj);
  // The integrand decays at twice the state rate; guard against a flat fit.
  res.tail_estimate = lambda > 1e-6 ? g_last / (2.0 * lambda) : g_last;
  return res;
}

double check_vdot_identity(const DelaySystem& sys, const ValueKernel& Vi,
                           const FeedbackLaw& law_i,
                           const FeedbackLaw& law_ip1, const Trajectory& traj,
                           const MatrixXd& Q, const MatrixXd& R,
                           int num_checkpoints) {
  const int first = traj.history_count + 1;
  const int last = traj.total() - 2;
  if (last <= first) throw std::invalid_argument("trajectory too short");
  const int G = Vi.grid();
  const double dt = traj.dt;

  double max_err = 0.0;
  double max_rhs = 0.0;
  const int stride = std::max(1, (last - first) / std::max(1, num_checkpoints));
  for (int j = first; j <= last; j += stride) {
    const double v_prev =
        eval_value(Vi, segment_at(traj, j - 1, Vi.tau(), G));
    const double v_next =
        eval_value(Vi, segment_at(traj, j + 1, Vi.tau(), G));
    const double vdot = (v_next - v_prev) / (2.0 * dt);

    const VectorXd x = traj.x.col(j);
    const VectorXd u = traj.u.col(j);
    const VectorXd ui = eval_feedback_traj(law_i, traj, j);
    const VectorXd uip1 = eval_feedback_traj(law_ip1, traj, j);
    const double rhs = -x.dot(Q * x) - ui.dot(R * ui) +
                       2.0 * uip1.dot(R * ui) - 2.0 * u.dot(R * uip1);
    max_err = std::max(max_err, std::abs(vdot - rhs));
    max_rhs = std::max(max_rhs, std::abs(rhs));
  }
  return max_rhs > 0.0 ? max_err / max_rhs : max_err;
}

}  // namespace delayadp

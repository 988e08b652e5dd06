#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "delayadp/benchmarks.hpp"
#include "delayadp/semidisc.hpp"
#include "delayadp/value_kernel.hpp"

using namespace delayadp;

namespace {

DelaySystem scalar_system(double a, double ad, double b, double tau) {
  DelaySystem sys;
  sys.A = MatrixXd::Constant(1, 1, a);
  sys.Ad = MatrixXd::Constant(1, 1, ad);
  sys.B = MatrixXd::Constant(1, 1, b);
  sys.tau = tau;
  return sys;
}

}  // namespace

TEST_CASE("A = 0 discretizes to identity and dt-scaled inputs") {
  DelaySystem sys;
  sys.A = MatrixXd::Zero(2, 2);
  sys.Ad = (MatrixXd(2, 2) << 0.0, 0.3, -0.1, 0.0).finished();
  sys.B = (MatrixXd(2, 1) << 1.0, 2.0).finished();
  sys.tau = 0.4;
  const auto aug = semidisc::semidiscretize(sys, 0.1);
  CHECK(aug.r == 4);
  CHECK(aug.n == 2);
  CHECK(aug.dim() == 10);
  CHECK((aug.Abar.topLeftCorner(2, 2) - MatrixXd::Identity(2, 2)).norm() <
        1e-12);
  CHECK((aug.Bbar.topRows(2) - 0.1 * sys.B).norm() < 1e-12);
  // The delayed term enters the current block scaled by dt.
  CHECK((aug.Abar.block(0, 2 * aug.r, 2, 2) - 0.1 * sys.Ad).norm() < 1e-10);
  // Shift structure below the current block: each lagged block copies the
  // one above it and nothing else.
  for (int blk = 1; blk <= aug.r; ++blk) {
    MatrixXd row = aug.Abar.middleRows(2 * blk, 2);
    CHECK((row.middleCols(2 * (blk - 1), 2) - MatrixXd::Identity(2, 2))
              .norm() == 0.0);
    row.middleCols(2 * (blk - 1), 2).setZero();
    CHECK(row.norm() == 0.0);
  }
  CHECK(aug.Bbar.bottomRows(2 * aug.r).norm() == 0.0);
}

TEST_CASE("delay-free block matches the matrix exponential") {
  DelaySystem sys;
  sys.A = (MatrixXd(2, 2) << -1.0, 0.5, -0.3, -2.0).finished();
  sys.Ad = MatrixXd::Zero(2, 2);
  sys.B = (MatrixXd(2, 1) << 0.0, 1.0).finished();
  sys.tau = 0.2;
  const double dt = 0.1;
  const auto aug = semidisc::semidiscretize(sys, dt);

  const MatrixXd E = (sys.A * dt).exp();
  const MatrixXd F =
      sys.A.partialPivLu().solve(E - MatrixXd::Identity(2, 2)) * sys.B;
  CHECK((aug.Abar.topLeftCorner(2, 2) - E).norm() < 1e-9);
  CHECK((aug.Bbar.topRows(2) - F).norm() < 1e-9);
}

TEST_CASE("semidiscretize rejects a non-integer step ratio") {
  const DelaySystem sys = scalar_system(-1.0, 0.1, 1.0, 1.0);
  CHECK_THROWS_AS(semidisc::semidiscretize(sys, 0.3), std::invalid_argument);
}

TEST_CASE("metal cutting augments to 28 states at dt_d = 0.1") {
  const ExperimentConfig cfg = benchmark_metal_cutting();
  const auto aug = semidisc::semidiscretize(cfg.sys, cfg.dt_d);
  CHECK(aug.r == 13);
  CHECK(aug.dim() == 28);
  const MatrixXd Qbar = semidisc::lift_state_cost(aug, cfg.Q);
  CHECK((Qbar.topLeftCorner(2, 2) - cfg.Q * cfg.dt_d).norm() < 1e-14);
  CHECK(Qbar.bottomRightCorner(26, 26).norm() == 0.0);
}

TEST_CASE("dlqr reproduces the scalar algebraic Riccati solution") {
  // Ad = 0 leaves the lagged block uncontrolled and cost-free, so the
  // current-block gain solves the delay-free scalar DARE
  //   p = q + e^2 p - (e f p)^2 / (r + f^2 p),
  // whose positive root follows from the quadratic formula.
  const double a = -0.8, b = 1.0, dt = 0.1, q = 2.0, r = 0.5;
  const DelaySystem sys = scalar_system(a, 0.0, b, dt);
  const auto aug = semidisc::semidiscretize(sys, dt);
  const double e = std::exp(a * dt);
  const double f = (e - 1.0) / a * b;
  const double qbar = q * dt;
  const double rbar = r * dt;

  // p^2 f^2 + p (rbar - rbar e^2 - qbar f^2) - qbar rbar = 0.
  const double qa = f * f;
  const double qb = rbar - rbar * e * e - qbar * f * f;
  const double qc = -qbar * rbar;
  const double p = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
  const double k = e * f * p / (rbar + f * f * p);

  // dlqr takes the continuous R and scales it by dt internally.
  const MatrixXd Qbar = semidisc::lift_state_cost(aug, MatrixXd::Constant(1, 1, q));
  const auto res = semidisc::dlqr(aug, Qbar, MatrixXd::Constant(1, 1, r));
  CHECK(res.P(0, 0) == doctest::Approx(p).epsilon(1e-8));
  CHECK(res.gain(0, 0) == doctest::Approx(k).epsilon(1e-8));
  for (int j = 1; j < aug.dim(); ++j) {
    CHECK(std::abs(res.gain(0, j)) < 1e-10);
  }

  // The gain only depends on the cost ratio Q/R.
  const auto scaled =
      semidisc::dlqr(aug, 7.0 * Qbar, MatrixXd::Constant(1, 1, 7.0 * r));
  CHECK((scaled.gain - res.gain).norm() < 1e-8);
}

TEST_CASE("policy value oracle sums the geometric series") {
  // Zero gain, Ad = 0: P00 = qbar / (1 - e^2) and the Riccati fixed point of
  // dlqr is bounded above by it.
  const double a = -1.0, dt = 0.1, q = 1.0;
  const DelaySystem sys = scalar_system(a, 0.0, 1.0, dt);
  const auto aug = semidisc::semidiscretize(sys, dt);
  const MatrixXd Qbar = semidisc::lift_state_cost(aug, MatrixXd::Constant(1, 1, q));
  const MatrixXd Kd = MatrixXd::Zero(1, aug.dim());
  const MatrixXd R = MatrixXd::Identity(1, 1);
  const MatrixXd P = semidisc::policy_value_oracle(aug, Kd, Qbar, R);
  const double e = std::exp(a * dt);
  CHECK(P(0, 0) == doctest::Approx(q * dt / (1.0 - e * e)).epsilon(1e-10));

  const auto opt = semidisc::dlqr(aug, Qbar, R);
  CHECK(opt.P(0, 0) <= P(0, 0) + 1e-12);
  // The optimal gain's Lyapunov value reproduces its own Riccati solution.
  const MatrixXd Popt = semidisc::policy_value_oracle(aug, opt.gain, Qbar, R);
  CHECK((Popt - opt.P).norm() < 1e-8 * opt.P.norm());
}

TEST_CASE("spectral radius of the open loop is exp(a dt)") {
  const double a = -0.5, dt = 0.1;
  const DelaySystem sys = scalar_system(a, 0.0, 1.0, dt);
  const auto aug = semidisc::semidiscretize(sys, dt);
  const MatrixXd Kd = MatrixXd::Zero(1, aug.dim());
  CHECK(semidisc::spectral_radius_closed_loop(aug, Kd) ==
        doctest::Approx(std::exp(a * dt)).epsilon(1e-10));

  const FeedbackLaw zero = FeedbackLaw::zero_k1(MatrixXd::Zero(1, 1), dt, 10);
  CHECK(semidisc::closed_loop_radius(sys, zero, dt) ==
        doctest::Approx(std::exp(a * dt)).epsilon(1e-10));
}

TEST_CASE("oracle and sampled continuous cost agree with eval_cost") {
  const DelaySystem sys = scalar_system(-1.0, 0.0, 1.0, 0.5);
  const auto aug = semidisc::semidiscretize(sys, 0.1);
  const MatrixXd Q = MatrixXd::Identity(1, 1);
  const MatrixXd R = MatrixXd::Identity(1, 1);
  const SegmentState x0 = SegmentState::constant(VectorXd::Ones(1), 0.5, 100);

  // Open loop: J = 1/2 from the exponential.
  const MatrixXd Kd = MatrixXd::Zero(1, aug.dim());
  const double sampled =
      semidisc::continuous_cost_sampled(sys, aug, Kd, x0, Q, R, 20.0, 1e-3);
  CHECK(sampled == doctest::Approx(0.5).epsilon(1e-3));

  // Discrete oracle value of the zero gain approximates the same cost.
  const MatrixXd Qbar = semidisc::lift_state_cost(aug, Q);
  const MatrixXd P = semidisc::policy_value_oracle(aug, Kd, Qbar, R);
  CHECK(semidisc::oracle_value(aug, P, x0) ==
        doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("discretize_law samples K0 onto the current block") {
  const DelaySystem sys = scalar_system(-1.0, 0.2, 1.0, 0.4);
  const auto aug = semidisc::semidiscretize(sys, 0.1);
  FeedbackLaw law = FeedbackLaw::zero_k1(MatrixXd::Constant(1, 1, 2.5), 0.4, 40);
  MatrixXd Kd = semidisc::discretize_law(aug, law);
  REQUIRE(Kd.cols() == aug.dim());
  CHECK(Kd(0, 0) == doctest::Approx(2.5));
  CHECK(Kd.rightCols(aug.dim() - 1).norm() == 0.0);

  // Constant K1 spreads tau * k over the history blocks (trapezoid in
  // theta): the block weights sum to tau.
  for (auto& k1 : law.K1) k1 = MatrixXd::Constant(1, 1, 3.0);
  Kd = semidisc::discretize_law(aug, law);
  CHECK(Kd.rightCols(aug.dim() - 1).sum() + Kd(0, 0) - 2.5 ==
        doctest::Approx(3.0 * 0.4).epsilon(1e-6));
}

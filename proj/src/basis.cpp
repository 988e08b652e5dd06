#include "delayadp/basis.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "delayadp/veckit.hpp"

namespace delayadp::basis {

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

// Doubled strict-upper entries without a symmetry requirement; the
// pointwise value of P2 is not symmetric, only the (xi,theta) swap is.
VectorXd upper2(const MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  VectorXd w(veckit::pair_count(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) w[k++] = 2.0 * M(i, j);
  }
  return w;
}

}  // namespace

BasisSet BasisSet::polynomial(int degree, double tau) {
  if (degree < 0 || tau <= 0.0) {
    throw std::invalid_argument("polynomial basis: degree >= 0, tau > 0");
  }
  BasisSet bs;
  bs.degree_ = degree;
  bs.tau_ = tau;
  for (int a = 0; a <= degree; ++a) bs.phi_.push_back(a);
  // Symmetrized family ordered by total degree, then by the lower exponent;
  // for degree 3 this is exactly 1, xi+theta, xi^2+theta^2, xi*theta, ...
  for (int s = 0; s <= 2 * degree; ++s) {
    for (int a = 0; a <= degree; ++a) {
      const int b = s - a;
      if (b < a || b > degree) continue;
      bs.psi_.push_back({a, b, a != b});
    }
  }
  for (int b = 0; b <= degree; ++b) {
    for (int a = 0; a <= degree; ++a) bs.lambda_.push_back({a, b, false});
  }
  return bs;
}

VectorXd BasisSet::phi(double theta) const {
  VectorXd v(num_phi());
  for (int k = 0; k < num_phi(); ++k) v[k] = ipow(theta, phi_[k]);
  return v;
}

VectorXd BasisSet::psi(double xi, double theta) const {
  VectorXd v(num_psi());
  for (int k = 0; k < num_psi(); ++k) {
    const auto& mo = psi_[k];
    v[k] = ipow(xi, mo.a) * ipow(theta, mo.b);
    if (mo.symmetrized) v[k] += ipow(xi, mo.b) * ipow(theta, mo.a);
  }
  return v;
}

VectorXd BasisSet::lambda(double xi, double theta) const {
  VectorXd v(num_lambda());
  for (int k = 0; k < num_lambda(); ++k) {
    v[k] = ipow(xi, lambda_[k].a) * ipow(theta, lambda_[k].b);
  }
  return v;
}

VectorXd pack(const WeightLayout& lay, const WeightBlocks& blocks) {
  if (blocks.W0.size() != lay.n1() || blocks.W1.rows() != lay.n * lay.n ||
      blocks.W1.cols() != lay.num_phi || blocks.W2.rows() != lay.n ||
      blocks.W2.cols() != lay.num_psi || blocks.W3.rows() != lay.n2() ||
      blocks.W3.cols() != lay.num_lambda || blocks.U0.size() != lay.n * lay.m ||
      blocks.U1.rows() != lay.n * lay.m || blocks.U1.cols() != lay.num_phi) {
    throw std::invalid_argument("pack: block shape mismatch");
  }
  VectorXd v(lay.total());
  v.segment(lay.w0_offset(), blocks.W0.size()) = blocks.W0;
  v.segment(lay.w1_offset(), blocks.W1.size()) =
      Eigen::Map<const VectorXd>(blocks.W1.data(), blocks.W1.size());
  v.segment(lay.w2_offset(), blocks.W2.size()) =
      Eigen::Map<const VectorXd>(blocks.W2.data(), blocks.W2.size());
  if (blocks.W3.size() > 0) {
    v.segment(lay.w3_offset(), blocks.W3.size()) =
        Eigen::Map<const VectorXd>(blocks.W3.data(), blocks.W3.size());
  }
  v.segment(lay.u0_offset(), blocks.U0.size()) = blocks.U0;
  v.segment(lay.u1_offset(), blocks.U1.size()) =
      Eigen::Map<const VectorXd>(blocks.U1.data(), blocks.U1.size());
  return v;
}

WeightBlocks unpack(const WeightLayout& lay, const VectorXd& upsilon) {
  if (upsilon.size() != lay.total()) {
    throw std::invalid_argument("unpack: length mismatch");
  }
  WeightBlocks b;
  b.W0 = upsilon.segment(lay.w0_offset(), lay.n1());
  b.W1 = Eigen::Map<const MatrixXd>(upsilon.data() + lay.w1_offset(),
                                    lay.n * lay.n, lay.num_phi);
  b.W2 = Eigen::Map<const MatrixXd>(upsilon.data() + lay.w2_offset(), lay.n,
                                    lay.num_psi);
  b.W3 = Eigen::Map<const MatrixXd>(upsilon.data() + lay.w3_offset(), lay.n2(),
                                    lay.num_lambda);
  b.U0 = upsilon.segment(lay.u0_offset(), lay.n * lay.m);
  b.U1 = Eigen::Map<const MatrixXd>(upsilon.data() + lay.u1_offset(),
                                    lay.n * lay.m, lay.num_phi);
  return b;
}

ValueKernel reconstruct_kernel(const VectorXd& upsilon, const WeightLayout& lay,
                               const BasisSet& basis, int grid) {
  const WeightBlocks b = unpack(lay, upsilon);
  const int n = lay.n;
  const double tau = basis.tau();
  const double h = tau / grid;

  MatrixXd P0 = veckit::vecs_inv(b.W0);
  std::vector<MatrixXd> P1(grid + 1);
  for (int g = 0; g <= grid; ++g) {
    P1[g] = veckit::vec_inv(b.W1 * basis.phi(-tau + g * h), n, n);
  }
  std::vector<MatrixXd> P2((grid + 1) * (grid + 1));
  for (int a = 0; a <= grid; ++a) {
    const double xi = -tau + a * h;
    for (int g = 0; g <= grid; ++g) {
      const double theta = -tau + g * h;
      MatrixXd M(n, n);
      const VectorXd d = b.W2 * basis.psi(xi, theta);
      const VectorXd up = b.W3 * basis.lambda(xi, theta);
      const VectorXd lo = b.W3 * basis.lambda(theta, xi);
      M.diagonal() = d;
      int k = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          M(i, j) = 0.5 * up[k];
          M(j, i) = 0.5 * lo[k];  // mirrored: P2(xi,theta)' = P2(theta,xi)
          ++k;
        }
      }
      P2[a * (grid + 1) + g] = std::move(M);
    }
  }
  return ValueKernel(tau, std::move(P0), std::move(P1), std::move(P2));
}

FeedbackLaw reconstruct_law(const VectorXd& upsilon, const WeightLayout& lay,
                            const BasisSet& basis, int grid) {
  const WeightBlocks b = unpack(lay, upsilon);
  const double tau = basis.tau();
  FeedbackLaw law;
  law.tau = tau;
  law.K0 = veckit::vec_inv(b.U0, lay.m, lay.n);
  law.K1.resize(grid + 1);
  for (int g = 0; g <= grid; ++g) {
    law.K1[g] =
        veckit::vec_inv(b.U1 * basis.phi(-tau + g * tau / grid), lay.m, lay.n);
  }
  return law;
}

VectorXd project(const ValueKernel& V, const FeedbackLaw& next_law,
                 const WeightLayout& lay, const BasisSet& basis) {
  const int G = V.grid();
  const int n = lay.n;
  const double tau = V.tau();
  const double h = tau / G;
  WeightBlocks b;
  b.W0 = veckit::vecs(V.P0());
  b.U0 = veckit::vec(next_law.K0);

  // Fit on the theta nodes: min_W sum_g |W phi_g - target_g|^2.
  MatrixXd Phi(basis.num_phi(), G + 1);
  MatrixXd T1(n * n, G + 1), TK(lay.m * n, G + 1);
  for (int g = 0; g <= G; ++g) {
    Phi.col(g) = basis.phi(-tau + g * h);
    T1.col(g) = veckit::vec(V.P1(g));
    TK.col(g) = veckit::vec(next_law.K1[g]);
  }
  const MatrixXd PPt = Phi * Phi.transpose();
  const auto ldlt = PPt.ldlt();
  b.W1 = ldlt.solve(Phi * T1.transpose()).transpose();
  b.U1 = ldlt.solve(Phi * TK.transpose()).transpose();

  // Fit on the (xi, theta) grid pairs.
  const int pairs = (G + 1) * (G + 1);
  MatrixXd Psi(basis.num_psi(), pairs), Lam(basis.num_lambda(), pairs);
  MatrixXd Td(n, pairs), Tu(lay.n2(), pairs);
  for (int a = 0; a <= G; ++a) {
    const double xi = -tau + a * h;
    for (int g = 0; g <= G; ++g) {
      const double theta = -tau + g * h;
      const int col = a * (G + 1) + g;
      Psi.col(col) = basis.psi(xi, theta);
      Lam.col(col) = basis.lambda(xi, theta);
      Td.col(col) = V.P2(a, g).diagonal();
      Tu.col(col) = upper2(V.P2(a, g));
    }
  }
  b.W2 = (Psi * Psi.transpose())
             .ldlt()
             .solve(Psi * Td.transpose())
             .transpose();
  if (lay.n2() > 0) {
    b.W3 = (Lam * Lam.transpose())
               .ldlt()
               .solve(Lam * Tu.transpose())
               .transpose();
  } else {
    b.W3.resize(0, basis.num_lambda());
  }
  return pack(lay, b);
}

std::string weights_to_json(const VectorXd& upsilon, const WeightLayout& lay,
                            int degree) {
  nlohmann::json j;
  j["n"] = lay.n;
  j["m"] = lay.m;
  j["N"] = nlohmann::json::array({lay.num_phi, lay.num_psi, lay.num_lambda});
  j["degree"] = degree;
  j["upsilon"] = std::vector<double>(upsilon.data(),
                                     upsilon.data() + upsilon.size());
  return j.dump(2);
}

}  // namespace delayadp::basis

#pragma once

#include <string>
#include <vector>

#include "delayadp/value_kernel.hpp"

// Polynomial basis families for the data-driven regression and the packing
// of the composite weight vector.
//
//   Phi(theta): monomials 1, theta, ..., theta^d            (Np = d+1)
//   Psi(xi,theta): symmetrized monomials xi^a theta^b + xi^b theta^a for
//     a < b <= d and xi^a theta^a unscaled                   (Ns = (d+1)(d+2)/2)
//   Lambda(xi,theta): the full tensor family xi^a theta^b    (Nl = (d+1)^2)
//
// Weight layout (the composite vector):
//   [ W0 (n(n+1)/2) | vec(W1) (n^2 Np) | vec(W2) (n Ns) | vec(W3) (n2 Nl)
//     | U0 (nm) | vec(U1) (nm Np) ],   n2 = n(n-1)/2.
// When all three family sizes are equal this reduces to the single-N layout.
namespace delayadp::basis {

struct Monomial {
  int a = 0;  // xi exponent
  int b = 0;  // theta exponent
  bool symmetrized = false;  // xi^a theta^b + xi^b theta^a
};

class BasisSet {
 public:
  static BasisSet polynomial(int degree, double tau);

  int degree() const { return degree_; }
  double tau() const { return tau_; }
  int num_phi() const { return static_cast<int>(phi_.size()); }
  int num_psi() const { return static_cast<int>(psi_.size()); }
  int num_lambda() const { return static_cast<int>(lambda_.size()); }

  VectorXd phi(double theta) const;
  VectorXd psi(double xi, double theta) const;
  VectorXd lambda(double xi, double theta) const;

 private:
  int degree_ = 0;
  double tau_ = 0.0;
  std::vector<int> phi_;           // exponents
  std::vector<Monomial> psi_;
  std::vector<Monomial> lambda_;
};

struct WeightLayout {
  int n = 0, m = 0;
  int num_phi = 0, num_psi = 0, num_lambda = 0;

  WeightLayout() = default;
  WeightLayout(int n_, int m_, const BasisSet& basis)
      : n(n_), m(m_), num_phi(basis.num_phi()), num_psi(basis.num_psi()),
        num_lambda(basis.num_lambda()) {}
  WeightLayout(int n_, int m_, int N)  // single-N layout
      : n(n_), m(m_), num_phi(N), num_psi(N), num_lambda(N) {}

  int n1() const { return n * (n + 1) / 2; }
  int n2() const { return n * (n - 1) / 2; }
  int w0_offset() const { return 0; }
  int w1_offset() const { return n1(); }
  int w2_offset() const { return w1_offset() + n * n * num_phi; }
  int w3_offset() const { return w2_offset() + n * num_psi; }
  int u0_offset() const { return w3_offset() + n2() * num_lambda; }
  int u1_offset() const { return u0_offset() + n * m; }
  int total() const { return u1_offset() + n * m * num_phi; }
};

struct WeightBlocks {
  VectorXd W0;   // vecs(P0), length n1
  MatrixXd W1;   // n^2 x Np
  MatrixXd W2;   // n  x Ns
  MatrixXd W3;   // n2 x Nl
  VectorXd U0;   // vec(K0), length nm
  MatrixXd U1;   // nm x Np
};

VectorXd pack(const WeightLayout& lay, const WeightBlocks& blocks);
WeightBlocks unpack(const WeightLayout& lay, const VectorXd& upsilon);

// Kernel and law reconstruction on a uniform theta grid with G+1 nodes.
ValueKernel reconstruct_kernel(const VectorXd& upsilon, const WeightLayout& lay,
                               const BasisSet& basis, int grid);
FeedbackLaw reconstruct_law(const VectorXd& upsilon, const WeightLayout& lay,
                            const BasisSet& basis, int grid);

// Least-squares projection of a kernel / law pair onto the basis families on
// their grids; the independent route for testing the regression identity.
VectorXd project(const ValueKernel& V, const FeedbackLaw& next_law,
                 const WeightLayout& lay, const BasisSet& basis);

std::string weights_to_json(const VectorXd& upsilon, const WeightLayout& lay,
                            int degree);

}  // namespace delayadp::basis

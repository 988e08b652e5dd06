#pragma once

#include <Eigen/Dense>

// Vectorization and Kronecker-product calculus shared by all modules.
//
// Conventions: vec() stacks columns top to bottom.  vecs() walks the upper
// triangle row by row with off-diagonal entries doubled.  vecu() is the
// doubled strict upper triangle, diag() the diagonal.  vecv/vecd/vecp are the
// quadratic monomial vectors matching vecs/diag/vecu so that
// x'Px = vecv(x)'vecs(P).
namespace delayadp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace veckit {

// Relative symmetry tolerance accepted on inputs declared symmetric.
inline constexpr double kSymTol = 1e-10;

bool is_symmetric(const MatrixXd& P, double rel_tol = kSymTol);

VectorXd vec(const MatrixXd& A);                 // any shape, column stacking
MatrixXd vec_inv(const VectorXd& v, int rows, int cols);

VectorXd vecs(const MatrixXd& P);                // symmetric n x n -> n(n+1)/2
MatrixXd vecs_inv(const VectorXd& w);

VectorXd vecu(const MatrixXd& P);                // symmetric n x n -> n(n-1)/2
VectorXd diag(const MatrixXd& P);

VectorXd vecd(const VectorXd& nu, const VectorXd& mu);
VectorXd vecv(const VectorXd& nu);
VectorXd vecp(const VectorXd& nu, const VectorXd& mu);

MatrixXd kron(const MatrixXd& A, const MatrixXd& B);

// Number of strictly-upper pairs n(n-1)/2.
inline int pair_count(int n) { return n * (n - 1) / 2; }
// Triangular count n(n+1)/2.
inline int tri_count(int n) { return n * (n + 1) / 2; }

}  // namespace veckit
}  // namespace delayadp

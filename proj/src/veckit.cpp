#include "delayadp/veckit.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace delayadp::veckit {

namespace {

void require_square(const MatrixXd& A, const char* op) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw std::invalid_argument(std::string(op) + ": square matrix required, got " +
                                std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()));
  }
}

void require_symmetric(const MatrixXd& P, const char* op) {
  require_square(P, op);
  if (!is_symmetric(P)) {
    throw std::invalid_argument(std::string(op) + ": matrix is not symmetric");
  }
}

}  // namespace

bool is_symmetric(const MatrixXd& P, double rel_tol) {
  if (P.rows() != P.cols()) return false;
  const double scale = std::max(P.cwiseAbs().maxCoeff(), 1.0);
  return (P - P.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

VectorXd vec(const MatrixXd& A) {
  if (A.size() == 0) throw std::invalid_argument("vec: empty matrix");
  return Eigen::Map<const VectorXd>(A.data(), A.size());
}

MatrixXd vec_inv(const VectorXd& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw std::invalid_argument("vec_inv: length mismatch");
  }
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

VectorXd vecs(const MatrixXd& P) {
  require_symmetric(P, "vecs");
  const int n = static_cast<int>(P.rows());
  VectorXd w(tri_count(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    w[k++] = P(i, i);
    for (int j = i + 1; j < n; ++j) w[k++] = 2.0 * P(i, j);
  }
  return w;
}

MatrixXd vecs_inv(const VectorXd& w) {
  // Invert the triangular count: n(n+1)/2 = len.
  const auto len = w.size();
  const int n = static_cast<int>((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0 + 0.5);
  if (tri_count(n) != len) {
    throw std::invalid_argument("vecs_inv: length is not a triangular number");
  }
  MatrixXd P(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    P(i, i) = w[k++];
    for (int j = i + 1; j < n; ++j) {
      P(i, j) = P(j, i) = w[k++] / 2.0;
    }
  }
  return P;
}

VectorXd vecu(const MatrixXd& P) {
  require_symmetric(P, "vecu");
  const int n = static_cast<int>(P.rows());
  VectorXd w(pair_count(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) w[k++] = 2.0 * P(i, j);
  }
  return w;
}

VectorXd diag(const MatrixXd& P) {
  require_square(P, "diag");
  return P.diagonal();
}

VectorXd vecd(const VectorXd& nu, const VectorXd& mu) {
  if (nu.size() != mu.size()) throw std::invalid_argument("vecd: length mismatch");
  return nu.cwiseProduct(mu);
}

VectorXd vecv(const VectorXd& nu) {
  const int n = static_cast<int>(nu.size());
  VectorXd w(tri_count(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) w[k++] = nu[i] * nu[j];
  }
  return w;
}

VectorXd vecp(const VectorXd& nu, const VectorXd& mu) {
  if (nu.size() != mu.size()) throw std::invalid_argument("vecp: length mismatch");
  const int n = static_cast<int>(nu.size());
  VectorXd w(pair_count(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) w[k++] = nu[i] * mu[j];
  }
  return w;
}

MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

}  // namespace delayadp::veckit

#include "delayadp/kernels.hpp"

#include <cstdlib>

namespace delayadp::kernels {

namespace detail {

void axpy_scalar(double alpha, const double* x, double* y, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

void kron_axpy_scalar(double alpha, const double* u, std::size_t nu,
                      const double* v, std::size_t nv, double* out) {
  for (std::size_t i = 0; i < nu; ++i) {
    const double au = alpha * u[i];
    double* row = out + i * nv;
    for (std::size_t j = 0; j < nv; ++j) row[j] += au * v[j];
  }
}

void hadamard_scalar(const double* x, const double* y, double* out,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

double dot_scalar(const double* x, const double* y, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace detail

namespace {

bool avx2_enabled() {
  if (const char* f = std::getenv("DELAY_ADP_FORCE_SCALAR");
      f != nullptr && f[0] == '1') {
    return false;
  }
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Isa g_isa = avx2_enabled() ? Isa::Avx2 : Isa::Scalar;

}  // namespace

Isa active_isa() { return g_isa; }

void axpy(double alpha, const double* x, double* y, std::size_t len) {
  if (g_isa == Isa::Avx2) {
    detail::axpy_avx2(alpha, x, y, len);
  } else {
    detail::axpy_scalar(alpha, x, y, len);
  }
}

void kron_axpy(double alpha, const double* u, std::size_t nu, const double* v,
               std::size_t nv, double* out) {
  if (g_isa == Isa::Avx2) {
    detail::kron_axpy_avx2(alpha, u, nu, v, nv, out);
  } else {
    detail::kron_axpy_scalar(alpha, u, nu, v, nv, out);
  }
}

void hadamard(const double* x, const double* y, double* out, std::size_t n) {
  if (g_isa == Isa::Avx2) {
    detail::hadamard_avx2(x, y, out, n);
  } else {
    detail::hadamard_scalar(x, y, out, n);
  }
}

double dot(const double* x, const double* y, std::size_t len) {
  return g_isa == Isa::Avx2 ? detail::dot_avx2(x, y, len)
                            : detail::dot_scalar(x, y, len);
}

}  // namespace delayadp::kernels

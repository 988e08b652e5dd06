#pragma once

#include <cstddef>

// Low-level accumulation kernels used by the regression row assembly and the
// quadrature inner loops.  Each kernel has a scalar reference implementation
// and an AVX2 variant; the dispatcher picks the widest one supported by the
// host at first use.  Set the environment variable DELAY_ADP_FORCE_SCALAR=1
// to pin the scalar path.
namespace delayadp::kernels {

enum class Isa { Scalar, Avx2 };

// ISA selected by the runtime dispatcher.
Isa active_isa();

// y += alpha * x, length len.
void axpy(double alpha, const double* x, double* y, std::size_t len);

// out[i*nv + j] += alpha * u[i] * v[j]  (scaled Kronecker/outer accumulate).
void kron_axpy(double alpha, const double* u, std::size_t nu, const double* v,
               std::size_t nv, double* out);

// out[i] = x[i] * y[i], length n (the vecd product).
void hadamard(const double* x, const double* y, double* out, std::size_t n);

// <x, y>, length len.
double dot(const double* x, const double* y, std::size_t len);

namespace detail {
void axpy_scalar(double alpha, const double* x, double* y, std::size_t len);
void kron_axpy_scalar(double alpha, const double* u, std::size_t nu,
                      const double* v, std::size_t nv, double* out);
void hadamard_scalar(const double* x, const double* y, double* out,
                     std::size_t n);
double dot_scalar(const double* x, const double* y, std::size_t len);

void axpy_avx2(double alpha, const double* x, double* y, std::size_t len);
void kron_axpy_avx2(double alpha, const double* u, std::size_t nu,
                    const double* v, std::size_t nv, double* out);
void hadamard_avx2(const double* x, const double* y, double* out,
                   std::size_t n);
double dot_avx2(const double* x, const double* y, std::size_t len);
}  // namespace detail

}  // namespace delayadp::kernels

// AVX2/FMA variants of the accumulation kernels.  Compiled with -mavx2 -mfma
// in its own translation unit; only reached after the runtime check in
// kernels.cpp.

#include <immintrin.h>

#include "delayadp/kernels.hpp"

namespace delayadp::kernels::detail {

void axpy_avx2(double alpha, const double* x, double* y, std::size_t len) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < len; ++i) y[i] += alpha * x[i];
}

void kron_axpy_avx2(double alpha, const double* u, std::size_t nu,
                    const double* v, std::size_t nv, double* out) {
  for (std::size_t i = 0; i < nu; ++i) {
    const double au = alpha * u[i];
    double* row = out + i * nv;
    const __m256d a = _mm256_set1_pd(au);
    std::size_t j = 0;
    for (; j + 4 <= nv; j += 4) {
      __m256d r = _mm256_loadu_pd(row + j);
      r = _mm256_fmadd_pd(a, _mm256_loadu_pd(v + j), r);
      _mm256_storeu_pd(row + j, r);
    }
    for (; j < nv; ++j) row[j] += au * v[j];
  }
}

void hadamard_avx2(const double* x, const double* y, double* out,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

double dot_avx2(const double* x, const double* y, std::size_t len) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < len; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace delayadp::kernels::detail

// AVX2+FMA variants of the dense kernels. Compiled with -mavx2 -mfma on
// x86-64 only; dispatch guards execution behind a CPUID probe.

#include "arvrm/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ARVRM_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define ARVRM_HAVE_AVX2_TU 0
#endif

namespace arvrm::kernels {

#if ARVRM_HAVE_AVX2_TU

namespace {

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double avx2_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void avx2_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void avx2_scale(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void avx2_vadd(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void avx2_vsub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void avx2_vmul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

// Row-major accumulating product; the inner axpy over C rows keeps loads and
// stores contiguous for all three layouts.
void avx2_matmul_nn(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    std::size_t p = 0;
    for (; p + 2 <= k; p += 2) {
      const __m256d a0 = _mm256_set1_pd(arow[p]);
      const __m256d a1 = _mm256_set1_pd(arow[p + 1]);
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), acc);
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
    }
    for (; p < k; ++p) {
      const __m256d a0 = _mm256_set1_pd(arow[p]);
      const double* b0 = b + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j];
    }
  }
}

void avx2_matmul_nt(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      crow[j] += avx2_dot(arow, b + j * k, k);
    }
  }
}

void avx2_matmul_tn(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      double* crow = c + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), acc);
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

const Ops kAvx2Table{
    "avx2",    avx2_dot,  avx2_axpy,      avx2_scale,
    avx2_vadd, avx2_vsub, avx2_vmul,      avx2_matmul_nn,
    avx2_matmul_nt, avx2_matmul_tn,
};

}  // namespace

const Ops* avx2_ops() {
#if defined(__GNUC__) || defined(__clang__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return &kAvx2Table;
  }
#endif
  return nullptr;
}

#else  // !ARVRM_HAVE_AVX2_TU

const Ops* avx2_ops() { return nullptr; }

#endif

}  // namespace arvrm::kernels

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "tp/kernels.hpp"

// AVX2+FMA variants. exp/log use the usual Cephes-derived polynomial
// splits (~1 ulp of float); the equivalence suite pins them against the
// scalar reference at 1e-6 relative.

namespace tp::kernels {
namespace {

inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(80.0f);
  const __m256 lo = _mm256_set1_ps(-87.0f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);

  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);

  __m256 fx = _mm256_mul_ps(x, log2e);
  fx = _mm256_round_ps(fx, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

  __m256i emm0 = _mm256_cvttps_epi32(fx);
  emm0 = _mm256_add_epi32(emm0, _mm256_set1_epi32(0x7f));
  emm0 = _mm256_slli_epi32(emm0, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(emm0));
}

inline __m256 log256(__m256 x) {
  const __m256 min_norm = _mm256_castsi256_ps(_mm256_set1_epi32(0x00800000));
  const __m256 inv_mant = _mm256_castsi256_ps(_mm256_set1_epi32(~0x7f800000));
  __m256 invalid = _mm256_cmp_ps(x, _mm256_setzero_ps(), _CMP_LE_OS);
  x = _mm256_max_ps(x, min_norm);

  __m256i emm0 = _mm256_srli_epi32(_mm256_castps_si256(x), 23);
  emm0 = _mm256_sub_epi32(emm0, _mm256_set1_epi32(0x7f));
  __m256 e = _mm256_add_ps(_mm256_cvtepi32_ps(emm0), _mm256_set1_ps(1.0f));

  x = _mm256_and_ps(x, inv_mant);
  x = _mm256_or_ps(x, _mm256_set1_ps(0.5f));

  __m256 mask = _mm256_cmp_ps(x, _mm256_set1_ps(0.707106781186547524f), _CMP_LT_OS);
  __m256 tmp = _mm256_and_ps(x, mask);
  x = _mm256_sub_ps(x, _mm256_set1_ps(1.0f));
  e = _mm256_sub_ps(e, _mm256_and_ps(_mm256_set1_ps(1.0f), mask));
  x = _mm256_add_ps(x, tmp);

  __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(7.0376836292e-2f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.1514610310e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.1676998740e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.2420140846e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.4249322787e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.6668057665e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(2.0000714765e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-2.4999993993e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(3.3333331174e-1f));
  y = _mm256_mul_ps(y, _mm256_mul_ps(x, z));

  y = _mm256_fmadd_ps(e, _mm256_set1_ps(-2.12194440e-4f), y);
  y = _mm256_fnmadd_ps(_mm256_set1_ps(0.5f), z, y);
  x = _mm256_add_ps(x, y);
  x = _mm256_fmadd_ps(e, _mm256_set1_ps(0.693359375f), x);
  // x <= 0 -> -inf (never hit by our callers; softplus feeds 1+exp(...) >= 1)
  x = _mm256_blendv_ps(x, _mm256_set1_ps(-INFINITY), invalid);
  return x;
}

void add_v(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] + b[i];
}

void sub_v(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] - b[i];
}

void mul_v(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] * b[i];
}

void scale_v(const float* a, float s, float* o, std::size_t n) {
  __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), vs));
  for (; i < n; ++i) o[i] = a[i] * s;
}

void axpy_v(float alpha, const float* x, float* y, std::size_t n) {
  __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vexp_v(const float* a, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, exp256(_mm256_loadu_ps(a + i)));
  for (; i < n; ++i) o[i] = std::exp(a[i] > 80.f ? 80.f : a[i]);
}

void vsigmoid_v(const float* a, float* o, std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(a + i);
    __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), x));
    _mm256_storeu_ps(o + i, _mm256_div_ps(one, _mm256_add_ps(one, e)));
  }
  for (; i < n; ++i) o[i] = 1.0f / (1.0f + std::exp(-a[i]));
}

void vsoftplus_v(const float* a, float* o, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(a + i);
    __m256 m = _mm256_max_ps(x, zero);
    __m256 ax = _mm256_max_ps(x, _mm256_sub_ps(zero, x));
    __m256 l = log256(_mm256_add_ps(one, exp256(_mm256_sub_ps(zero, ax))));
    _mm256_storeu_ps(o + i, _mm256_add_ps(m, l));
  }
  for (; i < n; ++i) {
    float x = a[i];
    o[i] = (x > 0 ? x : 0) + std::log1p(std::exp(-std::fabs(x)));
  }
}

void vrelu_v(const float* a, float* o, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_max_ps(_mm256_loadu_ps(a + i), zero));
  for (; i < n; ++i) o[i] = a[i] > 0 ? a[i] : 0;
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

float sum_v(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
  float s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

float dot_v(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemm_v(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
            const float* a, const float* b, float* c, bool accumulate) {
  if (ta && tb) {  // not used on any hot path
    scalar::gemm(ta, tb, m, n, k, a, b, c, accumulate);
    return;
  }
  if (!accumulate)
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0;

  if (!ta && tb) {  // C[i,j] = dot(A row i, B row j)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c[i * n + j] += dot_v(a + i * k, b + j * k, k);
    return;
  }
  // NN: C[i,:] += A[i,p] * B[p,:]   TN: C[i,:] += A[p,i] * B[p,:]
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      float av = ta ? a[p * m + i] : a[i * k + p];
      if (av == 0.0f) continue;
      axpy_v(av, b + p * n, crow, n);
    }
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops t = {
      &add_v, &sub_v, &mul_v, &scale_v, &axpy_v,
      &vexp_v, &vsigmoid_v, &vsoftplus_v, &vrelu_v,
      &sum_v, &dot_v, &gemm_v,
  };
  return t;
}

}  // namespace tp::kernels

#endif  // x86_64

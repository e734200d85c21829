#pragma once

#include <cmath>
#include <cstddef>

// Float inner loops behind a runtime-dispatched table: a scalar reference
// implementation and an AVX2+FMA variant, selected once per process from
// cpuid. Double runs scalar only; it exists for the 64-bit gradient-check
// mode where throughput does not matter.

namespace tp::kernels {

enum class Backend { kScalar, kAvx2 };

// Backend actually in use (after dispatch).
Backend active_backend();
const char* backend_name();

// Force a backend (tests compare scalar vs simd). Throws if the requested
// backend is not supported on this CPU. Passing kScalar always works.
void force_backend(Backend b);
void reset_backend();  // back to auto-detect

struct Ops {
  void (*add)(const float*, const float*, float*, std::size_t);
  void (*sub)(const float*, const float*, float*, std::size_t);
  void (*mul)(const float*, const float*, float*, std::size_t);
  void (*scale)(const float*, float, float*, std::size_t);
  void (*axpy)(float, const float*, float*, std::size_t);  // y += a*x
  void (*vexp)(const float*, float*, std::size_t);         // input clamped to <= 80
  void (*vsigmoid)(const float*, float*, std::size_t);
  void (*vsoftplus)(const float*, float*, std::size_t);
  void (*vrelu)(const float*, float*, std::size_t);
  float (*sum)(const float*, std::size_t);
  float (*dot)(const float*, const float*, std::size_t);
  // C[m x n] (+)= op(A) * op(B); op per trans flag. Row-major, packed.
  void (*gemm)(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
               const float* a, const float* b, float* c, bool accumulate);
};

const Ops& ops();

// Scalar reference implementations, also used directly by the equivalence
// tests and by the double instantiations below.
namespace scalar {

constexpr double kExpClamp = 80.0;

template <class T>
void add(const T* a, const T* b, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
}
template <class T>
void sub(const T* a, const T* b, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] - b[i];
}
template <class T>
void mul(const T* a, const T* b, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}
template <class T>
void scale(const T* a, T s, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * s;
}
template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <class T>
void vexp(const T* a, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T x = a[i] > T(kExpClamp) ? T(kExpClamp) : a[i];
    o[i] = std::exp(x);
  }
}
template <class T>
void vsigmoid(const T* a, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = T(1) / (T(1) + std::exp(-a[i]));
}
template <class T>
void vsoftplus(const T* a, T* o, std::size_t n) {
  // max(x,0) + log1p(exp(-|x|)): stable and never negative.
  for (std::size_t i = 0; i < n; ++i) {
    T x = a[i];
    T m = x > T(0) ? x : T(0);
    o[i] = m + std::log1p(std::exp(-(x < T(0) ? -x : x)));
  }
}
template <class T>
void vrelu(const T* a, T* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] > T(0) ? a[i] : T(0);
}
template <class T>
T sum(const T* a, std::size_t n) {
  T s = 0;  // fixed left-to-right order
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0;
  auto at = [&](std::size_t i, std::size_t p) { return ta ? a[p * m + i] : a[i * k + p]; };
  auto bt = [&](std::size_t p, std::size_t j) { return tb ? b[j * k + p] : b[p * n + j]; };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      T av = at(i, p);
      if (av == T(0)) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * bt(p, j);
    }
}

}  // namespace scalar

// Typed front ends used by the templated tensor code. Float goes through
// the dispatch table; any other type takes the scalar path.
template <class T> inline void add(const T* a, const T* b, T* o, std::size_t n) { scalar::add(a, b, o, n); }
template <class T> inline void sub(const T* a, const T* b, T* o, std::size_t n) { scalar::sub(a, b, o, n); }
template <class T> inline void mul(const T* a, const T* b, T* o, std::size_t n) { scalar::mul(a, b, o, n); }
template <class T> inline void scale(const T* a, T s, T* o, std::size_t n) { scalar::scale(a, s, o, n); }
template <class T> inline void axpy(T al, const T* x, T* y, std::size_t n) { scalar::axpy(al, x, y, n); }
template <class T> inline void vexp(const T* a, T* o, std::size_t n) { scalar::vexp(a, o, n); }
template <class T> inline void vsigmoid(const T* a, T* o, std::size_t n) { scalar::vsigmoid(a, o, n); }
template <class T> inline void vsoftplus(const T* a, T* o, std::size_t n) { scalar::vsoftplus(a, o, n); }
template <class T> inline void vrelu(const T* a, T* o, std::size_t n) { scalar::vrelu(a, o, n); }
template <class T> inline T sum(const T* a, std::size_t n) { return scalar::sum(a, n); }
template <class T> inline T dot(const T* a, const T* b, std::size_t n) { return scalar::dot(a, b, n); }
template <class T>
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 const T* a, const T* b, T* c, bool accumulate = false) {
  scalar::gemm(ta, tb, m, n, k, a, b, c, accumulate);
}

template <> inline void add<float>(const float* a, const float* b, float* o, std::size_t n) { ops().add(a, b, o, n); }
template <> inline void sub<float>(const float* a, const float* b, float* o, std::size_t n) { ops().sub(a, b, o, n); }
template <> inline void mul<float>(const float* a, const float* b, float* o, std::size_t n) { ops().mul(a, b, o, n); }
template <> inline void scale<float>(const float* a, float s, float* o, std::size_t n) { ops().scale(a, s, o, n); }
template <> inline void axpy<float>(float al, const float* x, float* y, std::size_t n) { ops().axpy(al, x, y, n); }
template <> inline void vexp<float>(const float* a, float* o, std::size_t n) { ops().vexp(a, o, n); }
template <> inline void vsigmoid<float>(const float* a, float* o, std::size_t n) { ops().vsigmoid(a, o, n); }
template <> inline void vsoftplus<float>(const float* a, float* o, std::size_t n) { ops().vsoftplus(a, o, n); }
template <> inline void vrelu<float>(const float* a, float* o, std::size_t n) { ops().vrelu(a, o, n); }
template <> inline float sum<float>(const float* a, std::size_t n) { return ops().sum(a, n); }
template <> inline float dot<float>(const float* a, const float* b, std::size_t n) { return ops().dot(a, b, n); }
template <>
inline void gemm<float>(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                        const float* a, const float* b, float* c, bool accumulate) {
  ops().gemm(ta, tb, m, n, k, a, b, c, accumulate);
}

}  // namespace tp::kernels

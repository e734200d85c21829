#include <cmath>
#include <vector>

#include "doctest.h"
#include "tp/kernels.hpp"
#include "tp/rng.hpp"

using namespace tp;
namespace k = tp::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, float lo = -4.f, float hi = 4.f) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

struct BackendRestore {
  ~BackendRestore() { k::reset_backend(); }
};

}  // namespace

TEST_CASE("simd elementwise kernels match scalar reference exactly") {
  if (k::active_backend() != k::Backend::kAvx2) return;  // nothing to compare
  BackendRestore restore;
  Rng rng(7);
  // odd sizes exercise the remainder lanes
  for (std::size_t n : {1u, 7u, 8u, 9u, 64u, 1000u, 1027u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    std::vector<float> ref(n), simd(n);
    k::force_backend(k::Backend::kScalar);
    k::ops().add(a.data(), b.data(), ref.data(), n);
    k::force_backend(k::Backend::kAvx2);
    k::ops().add(a.data(), b.data(), simd.data(), n);
    CHECK(ref == simd);

    k::force_backend(k::Backend::kScalar);
    k::ops().mul(a.data(), b.data(), ref.data(), n);
    k::force_backend(k::Backend::kAvx2);
    k::ops().mul(a.data(), b.data(), simd.data(), n);
    CHECK(ref == simd);

    k::force_backend(k::Backend::kScalar);
    k::ops().vrelu(a.data(), ref.data(), n);
    k::force_backend(k::Backend::kAvx2);
    k::ops().vrelu(a.data(), simd.data(), n);
    CHECK(ref == simd);
  }
}

TEST_CASE("simd transcendental kernels match scalar within 1e-6 relative") {
  if (k::active_backend() != k::Backend::kAvx2) return;
  BackendRestore restore;
  Rng rng(11);
  std::size_t n = 4097;
  auto a = random_vec(n, rng, -20.f, 20.f);
  a[0] = 0.f;
  a[1] = 80.f;    // exp clamp boundary
  a[2] = 100.f;   // beyond clamp
  a[3] = -30.f;
  std::vector<float> ref(n), simd(n);
  for (auto fn : {&k::Ops::vexp, &k::Ops::vsigmoid, &k::Ops::vsoftplus}) {
    k::force_backend(k::Backend::kScalar);
    (k::ops().*fn)(a.data(), ref.data(), n);
    k::force_backend(k::Backend::kAvx2);
    (k::ops().*fn)(a.data(), simd.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      double denom = std::max(1.0, std::abs(double(ref[i])));
      CHECK(std::abs(double(ref[i]) - double(simd[i])) / denom < 1e-6);
    }
  }
}

TEST_CASE("simd sum/dot match scalar within accumulation tolerance") {
  if (k::active_backend() != k::Backend::kAvx2) return;
  BackendRestore restore;
  Rng rng(13);
  for (std::size_t n : {1u, 9u, 255u, 4096u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    k::force_backend(k::Backend::kScalar);
    double s_ref = k::ops().sum(a.data(), n);
    double d_ref = k::ops().dot(a.data(), b.data(), n);
    k::force_backend(k::Backend::kAvx2);
    CHECK(k::ops().sum(a.data(), n) == doctest::Approx(s_ref).epsilon(1e-5));
    CHECK(k::ops().dot(a.data(), b.data(), n) == doctest::Approx(d_ref).epsilon(1e-5));
  }
}

TEST_CASE("simd gemm matches scalar reference for all used transpose modes") {
  if (k::active_backend() != k::Backend::kAvx2) return;
  BackendRestore restore;
  Rng rng(17);
  struct Case { int m, n, k; bool ta, tb; };
  for (Case c : {Case{5, 7, 3, false, false}, Case{8, 8, 8, false, true},
                 Case{13, 4, 9, true, false}, Case{3, 5, 2, true, true},
                 Case{33, 17, 21, false, false}}) {
    std::size_t an = std::size_t(c.m) * c.k, bn = std::size_t(c.k) * c.n;
    auto a = random_vec(an, rng), b = random_vec(bn, rng);
    std::vector<float> ref(std::size_t(c.m) * c.n), simd(ref.size());
    auto co = random_vec(ref.size(), rng);
    for (bool accumulate : {false, true}) {
      ref = co; simd = co;
      k::force_backend(k::Backend::kScalar);
      k::ops().gemm(c.ta, c.tb, c.m, c.n, c.k, a.data(), b.data(), ref.data(), accumulate);
      k::force_backend(k::Backend::kAvx2);
      k::ops().gemm(c.ta, c.tb, c.m, c.n, c.k, a.data(), b.data(), simd.data(), accumulate);
      for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(simd[i] == doctest::Approx(ref[i]).epsilon(1e-4));
    }
  }
}

TEST_CASE("gemm transpose flags agree with explicit transposition") {
  Rng rng(19);
  int m = 6, n = 5, kk = 4;
  auto a = random_vec(std::size_t(m) * kk, rng);
  auto b = random_vec(std::size_t(kk) * n, rng);
  std::vector<float> at(a.size()), bt(b.size());
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
  for (int p = 0; p < kk; ++p)
    for (int j = 0; j < n; ++j) bt[j * kk + p] = b[p * n + j];

  std::vector<float> base(std::size_t(m) * n), out(base.size());
  k::gemm<float>(false, false, m, n, kk, a.data(), b.data(), base.data(), false);
  k::gemm<float>(true, false, m, n, kk, at.data(), b.data(), out.data(), false);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(out[i] == doctest::Approx(base[i]));
  k::gemm<float>(false, true, m, n, kk, a.data(), bt.data(), out.data(), false);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(out[i] == doctest::Approx(base[i]));
  k::gemm<float>(true, true, m, n, kk, at.data(), bt.data(), out.data(), false);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(out[i] == doctest::Approx(base[i]));
}

TEST_CASE("softplus is exactly nonnegative and exp clamps its input") {
  std::vector<float> in = {-200.f, -50.f, -1.f, 0.f, 1.f, 90.f, 200.f};
  std::vector<float> out(in.size());
  k::vsoftplus(in.data(), out.data(), in.size());
  for (float v : out) CHECK(v >= 0.0f);
  k::vexp(in.data(), out.data(), in.size());
  for (float v : out) CHECK(v <= std::exp(80.f) * 1.001f);
  CHECK(std::isfinite(out.back()));
}

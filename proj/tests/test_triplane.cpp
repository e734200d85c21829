#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "tp/gradcheck.hpp"
#include "tp/triplane.hpp"

using namespace tp;

namespace {

TriplaneConfig micro_config() {
  TriplaneConfig cfg;
  cfg.r = 4;
  cfg.R = 8;
  cfg.C = 4;
  cfg.emb_dim = 8;
  cfg.heads = 2;
  cfg.in_dim = 16;
  return cfg;
}

FeatureMap<double> random_feature_map(int n, int dim, Rng& rng, bool grad = false) {
  std::vector<double> g(std::size_t(n) * dim), p(dim);
  for (auto& v : g) v = rng.uniform(-1, 1);
  for (auto& v : p) v = rng.uniform(-1, 1);
  FeatureMap<double> fm;
  fm.grid = grad ? Var<double>::param({n, dim}, std::move(g))
                 : Var<double>::constant({n, dim}, std::move(g));
  fm.pooled = Var<double>::constant({1, dim}, std::move(p));
  fm.g = 0;
  fm.dim = dim;
  return fm;
}

Triplane<double> random_triplane(int R, int C, Rng& rng) {
  Triplane<double> tp;
  tp.R = R;
  tp.C = C;
  for (int p = 0; p < 3; ++p) {
    std::vector<double> v(std::size_t(R) * R * C);
    for (auto& x : v) x = rng.uniform(-1, 1);
    tp.planes[p] = Var<double>::constant({R, R, C}, std::move(v));
  }
  return tp;
}

// independent reimplementation of project + interpolate + sum for the oracle
std::vector<double> query_oracle(const Triplane<double>& tp, const std::vector<double>& pts) {
  int n = static_cast<int>(pts.size() / 3), R = tp.R, C = tp.C;
  std::vector<double> out(std::size_t(n) * C, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = pts[3 * i], y = pts[3 * i + 1], z = pts[3 * i + 2];
    double proj[3][2] = {{x, y}, {x, z}, {y, z}};
    for (int p = 0; p < 3; ++p) {
      double u = (std::clamp(proj[p][0], -1.0, 1.0) + 1) * 0.5 * (R - 1);
      double w = (std::clamp(proj[p][1], -1.0, 1.0) + 1) * 0.5 * (R - 1);
      int x0 = std::min(int(std::floor(u)), R - 2);
      int y0 = std::min(int(std::floor(w)), R - 2);
      double fx = u - x0, fy = w - y0;
      const double* d = tp.planes[p].data().data();
      for (int c = 0; c < C; ++c) {
        double v00 = d[(std::size_t(y0) * R + x0) * C + c];
        double v01 = d[(std::size_t(y0) * R + x0 + 1) * C + c];
        double v10 = d[(std::size_t(y0 + 1) * R + x0) * C + c];
        double v11 = d[(std::size_t(y0 + 1) * R + x0 + 1) * C + c];
        out[std::size_t(i) * C + c] +=
            (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("triplane: upsample block counts and invalid side ratios") {
  TriplaneConfig cfg = micro_config();
  cfg.r = 8;
  cfg.R = 32;
  CHECK(cfg.upsample_blocks() == 2);
  cfg.r = 16;
  cfg.R = 128;
  CHECK(cfg.upsample_blocks() == 3);
  cfg.r = 8;
  cfg.R = 24;  // not a power-of-two multiple
  CHECK_THROWS_AS(cfg.upsample_blocks(), ConfigError);
  cfg.R = 8;  // k = 0
  CHECK_THROWS_AS(cfg.upsample_blocks(), ConfigError);
}

TEST_CASE("triplane: single key/value token collapses attention to its value") {
  Rng rng(1);
  auto attn = MultiHeadAttention<double>::init(8, 16, 8, 2, rng);
  std::vector<double> qd(5 * 8), kd(16);
  for (auto& v : qd) v = rng.uniform(-1, 1);
  for (auto& v : kd) v = rng.uniform(-1, 1);
  auto q = Var<double>::constant({5, 8}, std::move(qd));
  auto kv = Var<double>::constant({1, 16}, kd);
  auto out = attn(q, kv);
  auto expect = attn.wo(attn.wv(Var<double>::constant({1, 16}, kd)));
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(out.data()[std::size_t(r) * 8 + c] ==
            doctest::Approx(expect.data()[c]).epsilon(1e-12));
}

TEST_CASE("triplane: zero output convolution gives all-zero planes") {
  Rng rng(2);
  auto dec = TriplaneDecoder<double>::init(micro_config(), rng);
  std::fill(dec.out_conv.w.data().begin(), dec.out_conv.w.data().end(), 0.0);
  auto fm = random_feature_map(9, 16, rng);
  auto tp = dec.decode(fm);
  for (int p = 0; p < 3; ++p) {
    REQUIRE(tp.planes[p].shape() == std::vector<int>{8, 8, 4});
    for (double v : tp.planes[p].data()) CHECK(v == 0.0);
  }
}

TEST_CASE("triplane: decode rejects a mismatched feature dim") {
  Rng rng(3);
  auto dec = TriplaneDecoder<double>::init(micro_config(), rng);
  auto fm = random_feature_map(9, 12, rng);
  CHECK_THROWS_AS(dec.decode(fm), ContractError);
}

TEST_CASE("query_features: zero planes give zero features") {
  Triplane<double> tp;
  tp.R = 8;
  tp.C = 4;
  for (int p = 0; p < 3; ++p) tp.planes[p] = Var<double>::zeros({8, 8, 4}, false);
  std::vector<double> pts = {0, 0, 0, 0.3, -0.7, 0.1, -1, -1, -1};
  auto out = query_features(tp, pts);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("query_features: one constant plane returns its vector everywhere") {
  Triplane<double> tp;
  tp.R = 8;
  tp.C = 3;
  std::vector<double> v = {1.5, -2.0, 0.25};
  std::vector<double> plane(8 * 8 * 3);
  for (int i = 0; i < 64; ++i)
    for (int c = 0; c < 3; ++c) plane[std::size_t(i) * 3 + c] = v[c];
  tp.planes[1] = Var<double>::constant({8, 8, 3}, std::move(plane));
  tp.planes[0] = Var<double>::zeros({8, 8, 3}, false);
  tp.planes[2] = Var<double>::zeros({8, 8, 3}, false);
  Rng rng(4);
  std::vector<double> pts(10 * 3);
  for (auto& p : pts) p = rng.uniform(-1, 1);
  auto out = query_features(tp, pts);
  for (int i = 0; i < 10; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out.data()[std::size_t(i) * 3 + c] == doctest::Approx(v[c]).epsilon(1e-12));
}

TEST_CASE("query_features: 50 random points match the independent oracle") {
  Rng rng(5);
  auto tp = random_triplane(8, 4, rng);
  std::vector<double> pts(50 * 3);
  for (auto& p : pts) p = rng.uniform(-1, 1);
  auto out = query_features(tp, pts);
  auto oracle = query_oracle(tp, pts);
  double max_diff = 0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    max_diff = std::max(max_diff, std::abs(out.data()[i] - oracle[i]));
  CHECK(max_diff < 1e-6);
}

TEST_CASE("query_features: additive in the planes") {
  Rng rng(6);
  auto a = random_triplane(8, 4, rng);
  auto b = random_triplane(8, 4, rng);
  Triplane<double> sum;
  sum.R = 8;
  sum.C = 4;
  for (int p = 0; p < 3; ++p) {
    std::vector<double> s(a.planes[p].size());
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = a.planes[p].data()[i] + b.planes[p].data()[i];
    sum.planes[p] = Var<double>::constant({8, 8, 4}, std::move(s));
  }
  std::vector<double> pts(20 * 3);
  for (auto& p : pts) p = rng.uniform(-1, 1);
  auto qa = query_features(a, pts);
  auto qb = query_features(b, pts);
  auto qs = query_features(sum, pts);
  for (std::size_t i = 0; i < qs.size(); ++i)
    CHECK(qs.data()[i] == doctest::Approx(qa.data()[i] + qb.data()[i]).epsilon(1e-10));
}

TEST_CASE("query_features: continuous across grid-cell boundaries") {
  Rng rng(7);
  auto tp = random_triplane(8, 4, rng);
  // grid nodes sit at -1 + 2*i/(R-1); straddle an interior node on x
  double node = -1.0 + 2.0 * 3 / 7;
  for (double eps : {1e-4, 1e-6, 1e-8}) {
    std::vector<double> lo = {node - eps, 0.2, -0.4};
    std::vector<double> hi = {node + eps, 0.2, -0.4};
    auto a = query_features(tp, lo);
    auto b = query_features(tp, hi);
    for (int c = 0; c < 4; ++c)
      CHECK(std::abs(a.data()[c] - b.data()[c]) < 100 * eps);
  }
}

TEST_CASE("triplane: gradients flow to embeddings, attention, and convolutions") {
  Rng rng(8);
  auto dec = TriplaneDecoder<double>::init(micro_config(), rng);
  auto fm = random_feature_map(9, 16, rng, true);
  std::vector<double> pts(12 * 3);
  for (auto& p : pts) p = rng.uniform(-0.9, 0.9);
  auto tp = dec.decode(fm);
  auto feats = query_features(tp, pts);
  auto loss = mean_all(mul(feats, feats));
  backward(loss);
  auto nonzero = [](const Var<double>& v) {
    for (double g : v.grad())
      if (g != 0.0) return true;
    return false;
  };
  CHECK(nonzero(dec.xi));
  CHECK(nonzero(dec.cross.wq.w));
  CHECK(nonzero(dec.cross.wv.w));
  CHECK(nonzero(dec.to_feat.w));
  CHECK(nonzero(dec.convs[0].w));
  CHECK(nonzero(dec.out_conv.w));
  CHECK(nonzero(fm.grid));
}

TEST_CASE("triplane: decode-to-query gradient check on a micro config") {
  Rng rng(9);
  auto dec = TriplaneDecoder<double>::init(micro_config(), rng);
  auto fm = random_feature_map(9, 16, rng);
  std::vector<double> pts(8 * 3);
  for (auto& p : pts) p = rng.uniform(-0.9, 0.9);
  ParamList<double> pl;
  dec.collect(pl, "tri");
  std::vector<Var<double>> params;
  for (auto& [k, v] : pl) params.push_back(v);
  double err = check_gradients_params(
      [&] {
        auto tp = dec.decode(fm);
        auto feats = query_features(tp, pts);
        return mean_all(mul(feats, feats));
      },
      params, 1e-6, 6, 17);
  CHECK(err < 1e-5);
}

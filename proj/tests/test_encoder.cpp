#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "tp/encoder.hpp"
#include "tp/gradcheck.hpp"

using namespace tp;

namespace {

EncoderConfig micro_config() {
  EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.depth = 4;
  cfg.width = 8;
  cfg.heads = 2;
  return cfg;
}

std::vector<double> random_image(int size, Rng& rng) {
  std::vector<double> img(std::size_t(size) * size * 3);
  for (auto& v : img) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("encoder: grid and pooled shapes follow the config") {
  EncoderConfig cfg = micro_config();
  Rng rng(1);
  auto enc = VitEncoder<double>::init(cfg, rng);
  auto fm = enc.encode(random_image(16, rng));
  REQUIRE(fm.grid.shape() == std::vector<int>{4, 64});
  REQUIRE(fm.pooled.shape() == std::vector<int>{1, 64});
  CHECK(fm.g == 2);
  CHECK(fm.dim == 8 * cfg.width);
  for (double v : fm.grid.data()) CHECK(std::isfinite(v));
}

TEST_CASE("encoder: 256/16 configuration yields a 16x16 grid") {
  EncoderConfig cfg;
  cfg.image_size = 256;
  cfg.patch_size = 16;
  CHECK(cfg.grid() == 16);
  CHECK(cfg.n_patches() == 256);
}

TEST_CASE("encoder: invalid configs are rejected") {
  Rng rng(2);
  EncoderConfig cfg = micro_config();
  cfg.patch_size = 5;  // 16 % 5 != 0
  CHECK_THROWS_AS(VitEncoder<double>::init(cfg, rng), ContractError);
  cfg = micro_config();
  cfg.depth = 3;  // cannot tap the last four blocks
  CHECK_THROWS_AS(VitEncoder<double>::init(cfg, rng), ContractError);
  cfg = micro_config();
  cfg.heads = 3;  // width 8 not divisible
  CHECK_THROWS_AS(VitEncoder<double>::init(cfg, rng), ContractError);
}

TEST_CASE("encoder: wrong image size trips the contract") {
  Rng rng(3);
  auto enc = VitEncoder<double>::init(micro_config(), rng);
  std::vector<double> bad(8 * 8 * 3, 0.5);
  CHECK_THROWS_AS(enc.encode(bad), ContractError);
}

TEST_CASE("encoder: zero image with zero positions gives identical grid rows") {
  // with positional embeddings removed every patch token is the projection
  // bias, and the blocks act identically on identical tokens
  Rng rng(4);
  auto enc = VitEncoder<double>::init(micro_config(), rng);
  std::fill(enc.pos.data().begin(), enc.pos.data().end(), 0.0);
  auto fm = enc.encode(std::vector<double>(16 * 16 * 3, 0.0));
  int n = fm.grid.rows(), d = fm.grid.cols();
  for (int r = 1; r < n; ++r)
    for (int c = 0; c < d; ++c)
      CHECK(fm.grid.data()[std::size_t(r) * d + c] ==
            doctest::Approx(fm.grid.data()[c]).epsilon(1e-12));
}

TEST_CASE("encoder: horizontal flip changes the pooled vector") {
  Rng rng(5);
  auto enc = VitEncoder<double>::init(micro_config(), rng);
  int S = 16;
  auto img = random_image(S, rng);
  std::vector<double> flipped(img.size());
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x)
      for (int c = 0; c < 3; ++c)
        flipped[(std::size_t(y) * S + x) * 3 + c] =
            img[(std::size_t(y) * S + (S - 1 - x)) * 3 + c];
  auto a = enc.encode(img);
  auto b = enc.encode(flipped);
  double diff = 0;
  for (int i = 0; i < a.pooled.cols(); ++i)
    diff = std::max(diff, std::abs(a.pooled.data()[i] - b.pooled.data()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("encoder: encode is deterministic given weights and input") {
  Rng rng(6);
  auto enc = VitEncoder<double>::init(micro_config(), rng);
  auto img = random_image(16, rng);
  auto a = enc.encode(img);
  auto b = enc.encode(img);
  REQUIRE(a.grid.size() == b.grid.size());
  for (std::size_t i = 0; i < a.grid.size(); ++i)
    CHECK(a.grid.data()[i] == b.grid.data()[i]);
  for (std::size_t i = 0; i < a.pooled.size(); ++i)
    CHECK(a.pooled.data()[i] == b.pooled.data()[i]);
}

TEST_CASE("encoder: full-parameter gradient check on the 16x16 micro config") {
  Rng rng(7);
  auto enc = VitEncoder<double>::init(micro_config(), rng);
  auto img = random_image(16, rng);
  ParamList<double> pl;
  enc.collect(pl, "enc");
  std::vector<Var<double>> params;
  for (auto& [k, v] : pl) params.push_back(v);
  double err = check_gradients_params(
      [&] {
        auto fm = enc.encode(img);
        return add(mean_all(mul(fm.grid, fm.grid)), mean_all(mul(fm.pooled, fm.pooled)));
      },
      params, 1e-4, 6, 99);
  CHECK(err < 1e-5);
}

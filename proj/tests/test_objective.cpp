#include <cmath>

#include "doctest.h"
#include "tp/gradcheck.hpp"
#include "tp/objective.hpp"

using namespace tp;

namespace {
Var<double> cst(std::vector<int> shape, std::vector<double> v) {
  return Var<double>::constant(std::move(shape), std::move(v));
}
}  // namespace

TEST_CASE("rgb_loss: identity, saturation, single pixel") {
  auto a = cst({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  CHECK(rgb_loss(a, a).item() == 0.0);

  auto z = cst({2, 3}, std::vector<double>(6, 0.0));
  auto o = cst({2, 3}, std::vector<double>(6, 1.0));
  CHECK(rgb_loss(z, o).item() == doctest::Approx(1.0));

  auto p = cst({1, 1}, {0.2});
  auto q = cst({1, 1}, {0.5});
  CHECK(rgb_loss(p, q).item() == doctest::Approx(0.09));
}

TEST_CASE("rgb_loss: shape mismatch rejected") {
  auto a = cst({2, 3}, std::vector<double>(6, 0.0));
  auto b = cst({3, 2}, std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(rgb_loss(a, b), ContractError);
}

TEST_CASE("depth_loss: identity and constant offset") {
  auto d = cst({4, 1}, {1.7, 2.0, 3.0, 3.7});
  CHECK(depth_loss(d, d).item() == 0.0);
  auto d2 = cst({4, 1}, {1.9, 2.2, 3.2, 3.9});
  CHECK(depth_loss(d, d2).item() == doctest::Approx(0.04));  // c = 0.2
  // empty scene: oracle depth == far == zero-density render depth
  auto far1 = cst({3, 1}, std::vector<double>(3, 3.7));
  auto far2 = cst({3, 1}, std::vector<double>(3, 3.7));
  CHECK(depth_loss(far1, far2).item() == 0.0);
}

TEST_CASE("density_norm_loss: zero, constant, monotone") {
  CHECK(density_norm_loss(cst({2, 4}, std::vector<double>(8, 0.0))).item() == 0.0);
  CHECK(density_norm_loss(cst({2, 4}, std::vector<double>(8, 0.5))).item() ==
        doctest::Approx(0.5));
  std::vector<double> v = {0.1, 0.4, 0.9, 0.3};
  double before = density_norm_loss(cst({4}, v)).item();
  v[2] = 0.5;
  double after = density_norm_loss(cst({4}, v)).item();
  CHECK(after < before);
}

TEST_CASE("distillation_loss: identity, closed form, frozen teacher") {
  Rng rng(61);
  std::vector<double> g(12);
  for (auto& x : g) x = rng.uniform();
  auto student = Var<double>::param({3, 4}, g);
  auto teacher = cst({3, 4}, g);
  CHECK(distillation_loss(student, teacher).item() == 0.0);

  auto s2 = Var<double>::param({3, 4}, std::vector<double>(12, 2.0));
  auto t0 = cst({3, 4}, std::vector<double>(12, 0.0));
  CHECK(distillation_loss(s2, t0).item() == doctest::Approx(4.0));

  // a teacher on the gradient path is a contract violation
  auto t_grad = Var<double>::param({3, 4}, g);
  CHECK_THROWS_AS(distillation_loss(student, t_grad), ContractError);

  // backward from the loss leaves no gradient anywhere but the student
  auto loss = distillation_loss(s2, t0);
  backward(loss);
  bool any = false;
  for (double x : s2.node()->grad)
    if (x != 0.0) any = true;
  CHECK(any);
  CHECK(t0.node()->grad.empty());
}

TEST_CASE("total_loss: weighted sum, defaults, zero case") {
  LossWeights<double> w;  // defaults 0.1 / 1 / 1 / 1e-3
  auto one = cst({1}, {1.0});
  auto rep = total_loss(one, one, one, one, w);
  CHECK(rep.total.item() == doctest::Approx(2.101));

  auto zero = cst({1}, {0.0});
  CHECK(total_loss(zero, zero, zero, zero, w).total.item() == 0.0);

  // switching off the distillation term
  LossWeights<double> w2 = w;
  w2.dist = 0;
  auto rep2 = total_loss(one, one, one, one, w2);
  CHECK(rep2.total.item() == doctest::Approx(1.101));
}

TEST_CASE("total_loss: linearity in each component") {
  LossWeights<double> w;
  w.rgb = 0.3; w.depth = 0.7; w.dist = 0.2; w.norm = 0.05;
  auto mk = [](double v) { return cst({1}, {v}); };
  double base = total_loss(mk(1), mk(2), mk(3), mk(4), w).total.item();
  double bump = total_loss(mk(1 + 10), mk(2), mk(3), mk(4), w).total.item();
  CHECK(bump - base == doctest::Approx(10 * w.rgb));
  bump = total_loss(mk(1), mk(2), mk(3 + 5), mk(4), w).total.item();
  CHECK(bump - base == doctest::Approx(5 * w.dist));
}

TEST_CASE("total_loss: negative weight is a config error") {
  LossWeights<double> w;
  w.depth = -1;
  auto one = cst({1}, {1.0});
  CHECK_THROWS_AS(total_loss(one, one, one, one, w), ConfigError);
}

TEST_CASE("objective: gradients pass finite differences end to end") {
  Rng rng(67);
  auto mkp = [&](int n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform();
    return Var<double>::param({n}, std::move(v));
  };
  auto img = mkp(12), dep = mkp(4), feat = mkp(8), sig = mkp(6);
  auto img_t = cst({12}, std::vector<double>(12, 0.5));
  auto dep_t = cst({4}, std::vector<double>(4, 2.5));
  auto feat_t = cst({8}, std::vector<double>(8, 0.1));
  LossWeights<double> w;
  auto loss = [&]() {
    return total_loss(rgb_loss(img_t, img), depth_loss(dep_t, dep),
                      distillation_loss(feat, feat_t), density_norm_loss(sig), w)
        .total;
  };
  CHECK(check_gradients_params(loss, {img, dep, feat, sig}, 1e-6) < 1e-6);
}

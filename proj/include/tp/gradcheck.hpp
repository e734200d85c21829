#pragma once

#include <cstdint>
#include <vector>

#include "tp/rng.hpp"
#include "tp/tensor.hpp"

// Central finite-difference verification of reverse-mode gradients.
// Always run in double; float forward noise swamps the difference quotient.

namespace tp {

// loss_fn rebuilds the graph from the *current* values of params each call.
// coords_per_param < 0 checks every coordinate; otherwise a seeded random
// subset per parameter.
template <class LossFn>
double check_gradients_params(LossFn loss_fn, std::vector<Var<double>> params,
                       double step = 1e-5, int coords_per_param = -1,
                       std::uint64_t seed = 0) {
  Var<double> loss = loss_fn();
  contract(loss.size() == 1, "check_gradients: loss must be scalar");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    contract(p.requires_grad(), "check_gradients: parameter does not require grad");
    contract(p.grad().size() == p.size(), "check_gradients: missing gradient");
    analytic.push_back(p.grad());
  }

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    std::size_t n = p.size();
    std::vector<std::size_t> idx;
    if (coords_per_param < 0 || static_cast<std::size_t>(coords_per_param) >= n) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      Rng rng = Rng::stream(seed, 0x6743u, pi);
      for (int i = 0; i < coords_per_param; ++i)
        idx.push_back(static_cast<std::size_t>(rng.uniform_int(n)));
    }
    for (std::size_t i : idx) {
      double saved = p.data()[i];
      double lp, lm;
      {
        NoGradGuard ng;
        p.data()[i] = saved + step;
        lp = loss_fn().item();
        p.data()[i] = saved - step;
        lm = loss_fn().item();
        p.data()[i] = saved;
      }
      double fd = (lp - lm) / (2.0 * step);
      double an = analytic[pi][i];
      double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
      double rel = std::abs(an - fd) / denom;
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

// Single-tensor form: f maps the point to a scalar loss.
template <class F>
double check_gradients(F f, std::vector<int> shape, std::vector<double> point,
                       double step = 1e-5) {
  Var<double> x = Var<double>::param(std::move(shape), std::move(point));
  return check_gradients_params([&] { return f(x); }, {x}, step);
}

}  // namespace tp

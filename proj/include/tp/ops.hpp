#pragma once

#include <cmath>
#include <vector>

#include "tp/kernels.hpp"
#include "tp/tensor.hpp"

// Differentiable primitives. Each returns a fresh node whose closure
// accumulates into parents that require grad (their grad buffers are zeroed
// and sized by backward() before any closure runs).

namespace tp {

template <class Real>
inline void accum(Node<Real>* p, const std::vector<Real>& g) {
  if (p->grad.empty()) return;
  kernels::add(p->grad.data(), g.data(), p->grad.data(), g.size());
}

template <class Real>
inline void check_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  contract(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

// ---------------------------------------------------------------- elementwise

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  check_same_shape(a, b, "add");
  std::vector<Real> v(a.size());
  kernels::add(a.data().data(), b.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a, b}, "add",
                         [a, b](Node<Real>& n) {
                           accum(a.node().get(), n.grad);
                           accum(b.node().get(), n.grad);
                         });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  check_same_shape(a, b, "sub");
  std::vector<Real> v(a.size());
  kernels::sub(a.data().data(), b.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a, b}, "sub",
                         [a, b](Node<Real>& n) {
                           accum(a.node().get(), n.grad);
                           auto* pb = b.node().get();
                           if (!pb->grad.empty())
                             kernels::axpy(Real(-1), n.grad.data(), pb->grad.data(), n.grad.size());
                         });
}

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  check_same_shape(a, b, "mul");
  std::vector<Real> v(a.size());
  kernels::mul(a.data().data(), b.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a, b}, "mul",
                         [a, b](Node<Real>& n) {
                           std::vector<Real> t(n.grad.size());
                           auto* pa = a.node().get();
                           auto* pb = b.node().get();
                           if (!pa->grad.empty()) {
                             kernels::mul(n.grad.data(), pb->val.data(), t.data(), t.size());
                             kernels::add(pa->grad.data(), t.data(), pa->grad.data(), t.size());
                           }
                           if (!pb->grad.empty()) {
                             kernels::mul(n.grad.data(), pa->val.data(), t.data(), t.size());
                             kernels::add(pb->grad.data(), t.data(), pb->grad.data(), t.size());
                           }
                         });
}

template <class Real>
Var<Real> scale(const Var<Real>& a, Real s) {
  std::vector<Real> v(a.size());
  kernels::scale(a.data().data(), s, v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a}, "scale",
                         [a, s](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (!pa->grad.empty())
                             kernels::axpy(s, n.grad.data(), pa->grad.data(), n.grad.size());
                         });
}

template <class Real>
Var<Real> add_scalar(const Var<Real>& a, Real s) {
  std::vector<Real> v(a.data());
  for (auto& x : v) x += s;
  return make_node<Real>(a.shape(), std::move(v), {a}, "add_scalar",
                         [a](Node<Real>& n) { accum(a.node().get(), n.grad); });
}

template <class Real>
Var<Real> neg(const Var<Real>& a) { return scale(a, Real(-1)); }

// --------------------------------------------------------------- activations

template <class Real>
Var<Real> exp_(const Var<Real>& a) {
  std::vector<Real> v(a.size());
  kernels::vexp(a.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a}, "exp",
                         [a](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             if (pa->val[i] <= Real(kernels::scalar::kExpClamp))
                               pa->grad[i] += n.grad[i] * n.val[i];
                         });
}

template <class Real>
Var<Real> sigmoid(const Var<Real>& a) {
  std::vector<Real> v(a.size());
  kernels::vsigmoid(a.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a}, "sigmoid",
                         [a](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             pa->grad[i] += n.grad[i] * n.val[i] * (Real(1) - n.val[i]);
                         });
}

template <class Real>
Var<Real> softplus(const Var<Real>& a) {
  std::vector<Real> v(a.size());
  kernels::vsoftplus(a.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a}, "softplus",
                         [a](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           std::vector<Real> s(n.grad.size());
                           kernels::vsigmoid(pa->val.data(), s.data(), s.size());
                           kernels::mul(n.grad.data(), s.data(), s.data(), s.size());
                           kernels::add(pa->grad.data(), s.data(), pa->grad.data(), s.size());
                         });
}

template <class Real>
Var<Real> relu(const Var<Real>& a) {
  std::vector<Real> v(a.size());
  kernels::vrelu(a.data().data(), v.data(), v.size());
  return make_node<Real>(a.shape(), std::move(v), {a}, "relu",
                         [a](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             if (pa->val[i] > Real(0)) pa->grad[i] += n.grad[i];
                         });
}

template <class Real>
Var<Real> gelu(const Var<Real>& a) {
  std::vector<Real> v(a.size());
  const Real inv_sqrt2 = Real(0.7071067811865476);
  for (std::size_t i = 0; i < v.size(); ++i) {
    Real x = a.data()[i];
    v[i] = Real(0.5) * x * (Real(1) + std::erf(x * inv_sqrt2));
  }
  return make_node<Real>(a.shape(), std::move(v), {a}, "gelu",
                         [a, inv_sqrt2](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           const Real inv_sqrt2pi = Real(0.3989422804014327);
                           for (std::size_t i = 0; i < n.grad.size(); ++i) {
                             Real x = pa->val[i];
                             Real cdf = Real(0.5) * (Real(1) + std::erf(x * inv_sqrt2));
                             Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * x * x);
                             pa->grad[i] += n.grad[i] * (cdf + x * pdf);
                           }
                         });
}

// ------------------------------------------------------------ linear algebra

// C = op(A) * op(B), 2D row-major.
template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b, bool ta = false,
                 bool tb = false) {
  contract(a.shape().size() == 2 && b.shape().size() == 2, "matmul: rank != 2");
  int am = a.shape()[0], an = a.shape()[1];
  int bm = b.shape()[0], bn = b.shape()[1];
  int m = ta ? an : am, k = ta ? am : an;
  int kb = tb ? bn : bm, n = tb ? bm : bn;
  contract(k == kb, "matmul: inner dimensions disagree");
  std::vector<Real> v(static_cast<std::size_t>(m) * n);
  kernels::gemm<Real>(ta, tb, m, n, k, a.data().data(), b.data().data(), v.data(), false);
  return make_node<Real>({m, n}, std::move(v), {a, b}, "matmul",
      [a, b, ta, tb, m, n, k](Node<Real>& nd) {
        auto* pa = a.node().get();
        auto* pb = b.node().get();
        const Real* gc = nd.grad.data();
        const Real* av = pa->val.data();
        const Real* bv = pb->val.data();
        if (!pa->grad.empty()) {
          Real* ga = pa->grad.data();
          if (!ta && !tb)       kernels::gemm<Real>(false, true, m, k, n, gc, bv, ga, true);
          else if (!ta && tb)   kernels::gemm<Real>(false, false, m, k, n, gc, bv, ga, true);
          else if (ta && !tb)   kernels::gemm<Real>(false, true, k, m, n, bv, gc, ga, true);
          else                  kernels::gemm<Real>(true, true, k, m, n, bv, gc, ga, true);
        }
        if (!pb->grad.empty()) {
          Real* gb = pb->grad.data();
          if (!ta && !tb)       kernels::gemm<Real>(true, false, k, n, m, av, gc, gb, true);
          else if (!ta && tb)   kernels::gemm<Real>(true, false, n, k, m, gc, av, gb, true);
          else if (ta && !tb)   kernels::gemm<Real>(false, false, k, n, m, av, gc, gb, true);
          else                  kernels::gemm<Real>(true, true, n, k, m, gc, av, gb, true);
        }
      });
}

template <class Real>
Var<Real> add_rowvec(const Var<Real>& x, const Var<Real>& b) {
  contract(x.shape().size() == 2, "add_rowvec: x rank != 2");
  int rows = x.shape()[0], cols = x.shape()[1];
  contract(static_cast<int>(b.size()) == cols, "add_rowvec: bias size mismatch");
  std::vector<Real> v(x.size());
  for (int r = 0; r < rows; ++r)
    kernels::add(x.data().data() + std::size_t(r) * cols, b.data().data(),
                 v.data() + std::size_t(r) * cols, cols);
  return make_node<Real>(x.shape(), std::move(v), {x, b}, "add_rowvec",
                         [x, b, rows, cols](Node<Real>& n) {
                           accum(x.node().get(), n.grad);
                           auto* pb = b.node().get();
                           if (pb->grad.empty()) return;
                           for (int r = 0; r < rows; ++r)
                             kernels::add(pb->grad.data(),
                                          n.grad.data() + std::size_t(r) * cols,
                                          pb->grad.data(), cols);
                         });
}

// ------------------------------------------------------- softmax / layernorm

// Softmax over the last axis.
template <class Real>
Var<Real> softmax_rows(const Var<Real>& x) {
  int rows = x.rows(), cols = x.cols();
  std::vector<Real> v(x.size());
  for (int r = 0; r < rows; ++r) {
    const Real* in = x.data().data() + std::size_t(r) * cols;
    Real* out = v.data() + std::size_t(r) * cols;
    Real mx = in[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    Real s = 0;
    for (int c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      s += out[c];
    }
    Real inv = Real(1) / s;
    for (int c = 0; c < cols; ++c) out[c] *= inv;
  }
  return make_node<Real>(x.shape(), std::move(v), {x}, "softmax",
                         [x, rows, cols](Node<Real>& n) {
                           auto* px = x.node().get();
                           if (px->grad.empty()) return;
                           for (int r = 0; r < rows; ++r) {
                             const Real* y = n.val.data() + std::size_t(r) * cols;
                             const Real* g = n.grad.data() + std::size_t(r) * cols;
                             Real* gx = px->grad.data() + std::size_t(r) * cols;
                             Real gy = kernels::dot(g, y, cols);
                             for (int c = 0; c < cols; ++c) gx[c] += y[c] * (g[c] - gy);
                           }
                         });
}

// Layer normalization over the last axis with learned gain/bias.
template <class Real>
Var<Real> layernorm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias) {
  int rows = x.rows(), cols = x.cols();
  contract(static_cast<int>(gain.size()) == cols && static_cast<int>(bias.size()) == cols,
           "layernorm: gain/bias size mismatch");
  const Real eps = Real(1e-5);
  std::vector<Real> v(x.size());
  std::vector<Real> xhat(x.size());
  std::vector<Real> rstd(rows);
  for (int r = 0; r < rows; ++r) {
    const Real* in = x.data().data() + std::size_t(r) * cols;
    Real mu = kernels::sum(in, cols) / cols;
    Real var = 0;
    for (int c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= cols;
    Real rs = Real(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    Real* xh = xhat.data() + std::size_t(r) * cols;
    Real* out = v.data() + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) {
      xh[c] = (in[c] - mu) * rs;
      out[c] = xh[c] * gain.data()[c] + bias.data()[c];
    }
  }
  return make_node<Real>(x.shape(), std::move(v), {x, gain, bias}, "layernorm",
      [x, gain, bias, rows, cols, xhat = std::move(xhat), rstd = std::move(rstd)](Node<Real>& n) {
        auto* px = x.node().get();
        auto* pg = gain.node().get();
        auto* pb = bias.node().get();
        for (int r = 0; r < rows; ++r) {
          const Real* g = n.grad.data() + std::size_t(r) * cols;
          const Real* xh = xhat.data() + std::size_t(r) * cols;
          if (!pg->grad.empty())
            for (int c = 0; c < cols; ++c) pg->grad[c] += g[c] * xh[c];
          if (!pb->grad.empty())
            for (int c = 0; c < cols; ++c) pb->grad[c] += g[c];
          if (!px->grad.empty()) {
            Real* gx = px->grad.data() + std::size_t(r) * cols;
            Real mean_gh = 0, mean_ghx = 0;
            for (int c = 0; c < cols; ++c) {
              Real gh = g[c] * gain.data()[c];
              mean_gh += gh;
              mean_ghx += gh * xh[c];
            }
            mean_gh /= cols;
            mean_ghx /= cols;
            for (int c = 0; c < cols; ++c) {
              Real gh = g[c] * gain.data()[c];
              gx[c] += rstd[r] * (gh - mean_gh - xh[c] * mean_ghx);
            }
          }
        }
      });
}

// ----------------------------------------------------------------- reductions

template <class Real>
Var<Real> sum_all(const Var<Real>& a) {
  Real s = kernels::sum(a.data().data(), a.size());
  return make_node<Real>({1}, {s}, {a}, "sum",
                         [a](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           Real g = n.grad[0];
                           for (auto& x : pa->grad) x += g;
                         });
}

template <class Real>
Var<Real> mean_all(const Var<Real>& a) {
  Real inv = Real(1) / Real(a.size());
  Real s = kernels::sum(a.data().data(), a.size()) * inv;
  return make_node<Real>({1}, {s}, {a}, "mean",
                         [a, inv](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           Real g = n.grad[0] * inv;
                           for (auto& x : pa->grad) x += g;
                         });
}

// Mean squared error over all elements.
template <class Real>
Var<Real> mse_loss(const Var<Real>& a, const Var<Real>& b) {
  check_same_shape(a, b, "mse_loss");
  std::size_t n = a.size();
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  s /= Real(n);
  return make_node<Real>({1}, {s}, {a, b}, "mse_loss",
                         [a, b, n](Node<Real>& nd) {
                           Real g = nd.grad[0] * Real(2) / Real(n);
                           auto* pa = a.node().get();
                           auto* pb = b.node().get();
                           for (std::size_t i = 0; i < n; ++i) {
                             Real d = g * (pa->val[i] - pb->val[i]);
                             if (!pa->grad.empty()) pa->grad[i] += d;
                             if (!pb->grad.empty()) pb->grad[i] -= d;
                           }
                         });
}

// Mean absolute error over all elements (subgradient 0 at ties).
template <class Real>
Var<Real> mae_loss(const Var<Real>& a, const Var<Real>& b) {
  check_same_shape(a, b, "mae_loss");
  std::size_t n = a.size();
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.data()[i] - b.data()[i]);
  s /= Real(n);
  return make_node<Real>({1}, {s}, {a, b}, "mae_loss",
                         [a, b, n](Node<Real>& nd) {
                           Real g = nd.grad[0] / Real(n);
                           auto* pa = a.node().get();
                           auto* pb = b.node().get();
                           for (std::size_t i = 0; i < n; ++i) {
                             Real d = pa->val[i] - pb->val[i];
                             Real sg = d > 0 ? g : (d < 0 ? -g : Real(0));
                             if (!pa->grad.empty()) pa->grad[i] += sg;
                             if (!pb->grad.empty()) pb->grad[i] -= sg;
                           }
                         });
}

// Mean softmax cross-entropy; labels are class indices.
template <class Real>
Var<Real> softmax_cross_entropy(const Var<Real>& logits, const std::vector<int>& labels) {
  contract(logits.shape().size() == 2, "softmax_cross_entropy: logits rank != 2");
  int rows = logits.shape()[0], cols = logits.shape()[1];
  contract(static_cast<int>(labels.size()) == rows,
           "softmax_cross_entropy: label count mismatch");
  std::vector<Real> probs(logits.size());
  Real loss = 0;
  for (int r = 0; r < rows; ++r) {
    contract(labels[r] >= 0 && labels[r] < cols, "softmax_cross_entropy: label out of range");
    const Real* in = logits.data().data() + std::size_t(r) * cols;
    Real* p = probs.data() + std::size_t(r) * cols;
    Real mx = in[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    Real s = 0;
    for (int c = 0; c < cols; ++c) {
      p[c] = std::exp(in[c] - mx);
      s += p[c];
    }
    for (int c = 0; c < cols; ++c) p[c] /= s;
    loss -= std::log(std::max(p[labels[r]], Real(1e-30)));
  }
  loss /= rows;
  return make_node<Real>({1}, {loss}, {logits}, "softmax_cross_entropy",
      [logits, labels, rows, cols, probs = std::move(probs)](Node<Real>& nd) {
        auto* pl = logits.node().get();
        if (pl->grad.empty()) return;
        Real g = nd.grad[0] / rows;
        for (int r = 0; r < rows; ++r) {
          const Real* p = probs.data() + std::size_t(r) * cols;
          Real* gx = pl->grad.data() + std::size_t(r) * cols;
          for (int c = 0; c < cols; ++c)
            gx[c] += g * (p[c] - (c == labels[r] ? Real(1) : Real(0)));
        }
      });
}

// ------------------------------------------------------------- shape plumbing

template <class Real>
Var<Real> reshape(const Var<Real>& a, std::vector<int> shape) {
  contract(shape_numel(shape) == a.size(), "reshape: element count mismatch");
  std::vector<Real> v(a.data());
  return make_node<Real>(std::move(shape), std::move(v), {a}, "reshape",
                         [a](Node<Real>& n) { accum(a.node().get(), n.grad); });
}

// Row slice [r0, r1) of a 2D view.
template <class Real>
Var<Real> rows(const Var<Real>& a, int r0, int r1) {
  int R = a.rows(), C = a.cols();
  contract(0 <= r0 && r0 < r1 && r1 <= R, "rows: range out of bounds");
  std::vector<Real> v(std::size_t(r1 - r0) * C);
  std::copy(a.data().begin() + std::size_t(r0) * C, a.data().begin() + std::size_t(r1) * C,
            v.begin());
  return make_node<Real>({r1 - r0, C}, std::move(v), {a}, "rows",
                         [a, r0, C](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           kernels::add(pa->grad.data() + std::size_t(r0) * C, n.grad.data(),
                                        pa->grad.data() + std::size_t(r0) * C, n.grad.size());
                         });
}

// Column slice [c0, c1) of a 2D view.
template <class Real>
Var<Real> cols(const Var<Real>& a, int c0, int c1) {
  int R = a.rows(), C = a.cols();
  contract(0 <= c0 && c0 < c1 && c1 <= C, "cols: range out of bounds");
  int W = c1 - c0;
  std::vector<Real> v(std::size_t(R) * W);
  for (int r = 0; r < R; ++r)
    std::copy(a.data().begin() + std::size_t(r) * C + c0,
              a.data().begin() + std::size_t(r) * C + c1, v.begin() + std::size_t(r) * W);
  return make_node<Real>({R, W}, std::move(v), {a}, "cols",
                         [a, c0, C, W, R](Node<Real>& n) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           for (int r = 0; r < R; ++r)
                             kernels::add(pa->grad.data() + std::size_t(r) * C + c0,
                                          n.grad.data() + std::size_t(r) * W,
                                          pa->grad.data() + std::size_t(r) * C + c0, W);
                         });
}

template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  contract(!parts.empty(), "concat_cols: empty input");
  int R = parts[0].rows();
  int C = 0;
  for (const auto& p : parts) {
    contract(p.rows() == R, "concat_cols: row count mismatch");
    C += p.cols();
  }
  std::vector<Real> v(std::size_t(R) * C);
  int off = 0;
  for (const auto& p : parts) {
    int w = p.cols();
    for (int r = 0; r < R; ++r)
      std::copy(p.data().begin() + std::size_t(r) * w, p.data().begin() + std::size_t(r + 1) * w,
                v.begin() + std::size_t(r) * C + off);
    off += w;
  }
  return make_node<Real>({R, C}, std::move(v), parts, "concat_cols",
                         [parts, R, C](Node<Real>& n) {
                           int off = 0;
                           for (const auto& p : parts) {
                             int w = p.cols();
                             auto* pp = p.node().get();
                             if (!pp->grad.empty())
                               for (int r = 0; r < R; ++r)
                                 kernels::add(pp->grad.data() + std::size_t(r) * w,
                                              n.grad.data() + std::size_t(r) * C + off,
                                              pp->grad.data() + std::size_t(r) * w, w);
                             off += w;
                           }
                         });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
  contract(!parts.empty(), "concat_rows: empty input");
  int C = parts[0].cols();
  int R = 0;
  for (const auto& p : parts) {
    contract(p.cols() == C, "concat_rows: column count mismatch");
    R += p.rows();
  }
  std::vector<Real> v(std::size_t(R) * C);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), v.begin() + off);
    off += p.size();
  }
  return make_node<Real>({R, C}, std::move(v), parts, "concat_rows",
                         [parts](Node<Real>& n) {
                           std::size_t off = 0;
                           for (const auto& p : parts) {
                             auto* pp = p.node().get();
                             if (!pp->grad.empty())
                               kernels::add(pp->grad.data(), n.grad.data() + off,
                                            pp->grad.data(), pp->val.size());
                             off += p.size();
                           }
                         });
}

// Repeat a single row n times.
template <class Real>
Var<Real> tile_rows(const Var<Real>& a, int n) {
  int C = static_cast<int>(a.size());
  std::vector<Real> v(std::size_t(n) * C);
  for (int r = 0; r < n; ++r)
    std::copy(a.data().begin(), a.data().end(), v.begin() + std::size_t(r) * C);
  return make_node<Real>({n, C}, std::move(v), {a}, "tile_rows",
                         [a, n, C](Node<Real>& nd) {
                           auto* pa = a.node().get();
                           if (pa->grad.empty()) return;
                           for (int r = 0; r < n; ++r)
                             kernels::add(pa->grad.data(), nd.grad.data() + std::size_t(r) * C,
                                          pa->grad.data(), C);
                         });
}

}  // namespace tp

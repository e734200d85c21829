#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tp/ops.hpp"
#include "tp/ops_spatial.hpp"
#include "tp/rng.hpp"

// Small layer zoo on top of the tape. Layers hold their parameters as leaf
// Vars and build a fresh graph segment per forward call. Weight init is
// truncated normal (std 0.02) with zero biases throughout.

namespace tp {

template <class Real>
using ParamList = std::vector<std::pair<std::string, Var<Real>>>;

template <class Real>
Var<Real> init_weight(std::vector<int> shape, Rng& rng, double stddev = 0.02) {
  std::vector<Real> d(shape_numel(shape));
  for (auto& v : d) v = static_cast<Real>(rng.trunc_normal(stddev));
  return Var<Real>::param(std::move(shape), std::move(d));
}

template <class Real>
struct Linear {
  Var<Real> w;  // [in, out]
  Var<Real> b;  // [out]

  static Linear init(int in, int out, Rng& rng) {
    return {init_weight<Real>({in, out}, rng), Var<Real>::zeros({out}, true)};
  }

  Var<Real> operator()(const Var<Real>& x) const {
    return add_rowvec(matmul(x, w), b);
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <class Real>
struct Conv3x3Layer {
  Var<Real> w;  // [Cout, Cin*9]
  Var<Real> b;  // [Cout]

  static Conv3x3Layer init(int cin, int cout, Rng& rng) {
    return {init_weight<Real>({cout, cin * 9}, rng), Var<Real>::zeros({cout}, true)};
  }

  Var<Real> operator()(const Var<Real>& x) const { return conv3x3(x, w, b); }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <class Real>
struct LayerNormLayer {
  Var<Real> gain, bias;

  static LayerNormLayer init(int dim) {
    return {Var<Real>::param({dim}, std::vector<Real>(dim, Real(1))),
            Var<Real>::zeros({dim}, true)};
  }

  Var<Real> operator()(const Var<Real>& x) const { return layernorm(x, gain, bias); }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gain", gain);
    out.emplace_back(prefix + ".bias", bias);
  }
};

// Multi-head attention; self-attention when kv == q input. Width must be
// divisible by the head count.
template <class Real>
struct MultiHeadAttention {
  int heads = 1;
  Linear<Real> wq, wk, wv, wo;

  static MultiHeadAttention init(int q_dim, int kv_dim, int width, int heads, Rng& rng) {
    contract(width % heads == 0, "attention width not divisible by heads");
    return {heads, Linear<Real>::init(q_dim, width, rng), Linear<Real>::init(kv_dim, width, rng),
            Linear<Real>::init(kv_dim, width, rng), Linear<Real>::init(width, width, rng)};
  }

  Var<Real> operator()(const Var<Real>& q_in, const Var<Real>& kv_in) const {
    Var<Real> q = wq(q_in), k = wk(kv_in), v = wv(kv_in);
    int width = q.cols();
    int dh = width / heads;
    Real inv_sqrt = Real(1) / std::sqrt(Real(dh));
    std::vector<Var<Real>> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Var<Real> qh = cols(q, h * dh, (h + 1) * dh);
      Var<Real> kh = cols(k, h * dh, (h + 1) * dh);
      Var<Real> vh = cols(v, h * dh, (h + 1) * dh);
      Var<Real> att = softmax_rows(scale(matmul(qh, kh, false, true), inv_sqrt));
      outs.push_back(matmul(att, vh));
    }
    return wo(concat_cols(outs));
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    wq.collect(out, prefix + ".q");
    wk.collect(out, prefix + ".k");
    wv.collect(out, prefix + ".v");
    wo.collect(out, prefix + ".o");
  }
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <class Real>
struct TransformerBlock {
  LayerNormLayer<Real> ln1, ln2;
  MultiHeadAttention<Real> attn;
  Linear<Real> fc1, fc2;  // MLP, hidden = 4x width

  static TransformerBlock init(int width, int heads, Rng& rng) {
    return {LayerNormLayer<Real>::init(width), LayerNormLayer<Real>::init(width),
            MultiHeadAttention<Real>::init(width, width, width, heads, rng),
            Linear<Real>::init(width, 4 * width, rng),
            Linear<Real>::init(4 * width, width, rng)};
  }

  Var<Real> operator()(const Var<Real>& x) const {
    Var<Real> n1 = ln1(x);
    Var<Real> y = add(x, attn(n1, n1));
    return add(y, fc2(gelu(fc1(ln2(y)))));
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    ln1.collect(out, prefix + ".ln1");
    ln2.collect(out, prefix + ".ln2");
    attn.collect(out, prefix + ".attn");
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
  }
};

}  // namespace tp

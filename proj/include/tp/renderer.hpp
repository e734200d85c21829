#pragma once

#include <algorithm>
#include <vector>

#include "tp/camera.hpp"
#include "tp/triplane.hpp"

// Differentiable volume rendering: stratified coarse samples, importance
// resampling from the coarse compositing weights, a two-layer radiance MLP
// on triplane features, and front-to-back alpha compositing with a black
// background. Sample placement is treated as non-differentiable; gradients
// flow through densities and colors of the fine pass.

namespace tp {

// One uniform draw per equal-width bin of [near, far]; sorted by
// construction.
template <class Real>
std::vector<Real> stratified_samples(int n, Real near_t, Real far_t, Rng& rng) {
  contract(n >= 1, "stratified_samples: n must be >= 1");
  std::vector<Real> t(n);
  Real h = (far_t - near_t) / n;
  for (int i = 0; i < n; ++i)
    t[i] = near_t + (Real(i) + Real(rng.uniform())) * h;
  return t;
}

// Inverse-CDF draws from the piecewise-constant density proportional to the
// coarse weights over the equal-width coarse bins; all-zero weight falls
// back to a uniform stratified draw. Result is the coarse depths merged
// with the refined ones, sorted.
template <class Real>
std::vector<Real> importance_samples(const std::vector<Real>& coarse_t,
                                     const std::vector<Real>& w, int m,
                                     Real near_t, Real far_t, Rng& rng) {
  int nb = static_cast<int>(w.size());
  contract(static_cast<int>(coarse_t.size()) == nb, "importance_samples: size mismatch");
  for (Real x : w) contract(x >= 0, "importance_samples: negative weight");
  Real h = (far_t - near_t) / nb;
  Real total = 0;
  for (Real x : w) total += x;

  std::vector<Real> out = coarse_t;
  out.reserve(coarse_t.size() + m);
  if (total < Real(1e-8)) {
    Real hm = (far_t - near_t) / m;
    for (int i = 0; i < m; ++i)
      out.push_back(near_t + (Real(i) + Real(rng.uniform())) * hm);
  } else {
    std::vector<Real> cdf(nb);
    Real acc = 0;
    for (int i = 0; i < nb; ++i) {
      acc += w[i] / total;
      cdf[i] = acc;
    }
    cdf[nb - 1] = 1;
    for (int i = 0; i < m; ++i) {
      Real u = Real(rng.uniform());
      int bin = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      if (bin >= nb) bin = nb - 1;
      out.push_back(near_t + (Real(bin) + Real(rng.uniform())) * h);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Plain (non-differentiable) compositing pass shared by the coarse stage
// and the Var op's forward. t is [rays * s]; outputs are per sample/ray.
template <class Real>
struct CompositeRaw {
  std::vector<Real> weights;  // rays * s
  std::vector<Real> t_next;   // transmittance past each sample, rays * s
  std::vector<Real> t_res;    // residual transmittance per ray
};

template <class Real>
CompositeRaw<Real> composite_weights(const std::vector<Real>& sigma,
                                     const std::vector<Real>& t, int rays, int s,
                                     Real far_t) {
  CompositeRaw<Real> out;
  out.weights.resize(std::size_t(rays) * s);
  out.t_next.resize(std::size_t(rays) * s);
  out.t_res.resize(rays);
  for (int r = 0; r < rays; ++r) {
    const Real* tr = t.data() + std::size_t(r) * s;
    const Real* sg = sigma.data() + std::size_t(r) * s;
    Real trans = 1;
    for (int i = 0; i < s; ++i) {
      contract(i + 1 >= s || tr[i + 1] >= tr[i], "composite: depths must be sorted");
      Real delta = (i + 1 < s ? tr[i + 1] : far_t) - tr[i];
      if (delta < 0) delta = 0;
      Real alpha = -std::expm1(-sg[i] * delta);
      Real w = trans * alpha;
      trans *= (Real(1) - alpha);
      out.weights[std::size_t(r) * s + i] = w;
      out.t_next[std::size_t(r) * s + i] = trans;
    }
    out.t_res[r] = trans;
  }
  return out;
}

template <class Real>
struct CompositeOut {
  Var<Real> color;  // [rays, 3]
  Var<Real> depth;  // [rays, 1]
  std::vector<Real> weights;  // detached, rays * s
  std::vector<Real> t_res;    // detached, rays
};

// Front-to-back compositing as a single tape op with a hand-derived
// backward. sigma: [rays, s]; rgb: [rays*s, 3]; t: rays*s sorted depths.
// Black background; empty rays complete to far depth.
template <class Real>
CompositeOut<Real> composite(const Var<Real>& sigma, const Var<Real>& rgb,
                             const std::vector<Real>& t, Real far_t) {
  contract(sigma.shape().size() == 2, "composite: sigma must be [rays, s]");
  int rays = sigma.shape()[0], s = sigma.shape()[1];
  contract(rgb.shape().size() == 2 && rgb.shape()[1] == 3 &&
               rgb.shape()[0] == rays * s,
           "composite: rgb must be [rays*s, 3]");
  contract(static_cast<int>(t.size()) == rays * s, "composite: depth count mismatch");

  auto raw = composite_weights(sigma.data(), t, rays, s, far_t);

  std::vector<Real> color(std::size_t(rays) * 3, Real(0));
  std::vector<Real> depth(rays);
  for (int r = 0; r < rays; ++r) {
    Real* cr = color.data() + std::size_t(r) * 3;
    Real d = 0;
    for (int i = 0; i < s; ++i) {
      Real w = raw.weights[std::size_t(r) * s + i];
      const Real* c = rgb.data().data() + (std::size_t(r) * s + i) * 3;
      cr[0] += w * c[0];
      cr[1] += w * c[1];
      cr[2] += w * c[2];
      d += w * t[std::size_t(r) * s + i];
    }
    depth[r] = d + raw.t_res[r] * far_t;  // background completes the ray
  }

  // Shared backward state: the depth output participates through a second
  // node that reuses the same closure inputs.
  auto weights = raw.weights;
  auto t_next = raw.t_next;
  auto t_res = raw.t_res;

  // Both outputs are produced by one logical op; to keep the tape simple we
  // emit color as the op node and depth as a sibling node, each propagating
  // its own share of the gradient (the derivations are independent).
  auto backprop_common = [sigma, rgb, t, far_t, rays, s, weights, t_next, t_res](
                             const Real* g_color, const Real* g_depth) {
    auto* ps = sigma.node().get();
    auto* pc = rgb.node().get();
    for (int r = 0; r < rays; ++r) {
      const Real* tr = t.data() + std::size_t(r) * s;
      const Real* gc = g_color ? g_color + std::size_t(r) * 3 : nullptr;
      Real gd = g_depth ? g_depth[r] : Real(0);
      if (pc && !pc->grad.empty() && gc) {
        for (int i = 0; i < s; ++i) {
          Real w = weights[std::size_t(r) * s + i];
          Real* gcol = pc->grad.data() + (std::size_t(r) * s + i) * 3;
          gcol[0] += w * gc[0];
          gcol[1] += w * gc[1];
          gcol[2] += w * gc[2];
        }
      }
      if (ps && !ps->grad.empty()) {
        // q_i = g_color . c_i + g_depth * t_i ; background term uses far.
        Real q_bg = gd * far_t;  // black background: color term vanishes
        Real suffix = 0;
        for (int i = s - 1; i >= 0; --i) {
          std::size_t idx = std::size_t(r) * s + i;
          const Real* ci = pc->val.data() + idx * 3;
          Real qi = gd * tr[i];
          if (gc) qi += gc[0] * ci[0] + gc[1] * ci[1] + gc[2] * ci[2];
          Real delta = (i + 1 < s ? tr[i + 1] : far_t) - tr[i];
          if (delta < 0) delta = 0;
          Real grad = delta * (t_next[idx] * qi - suffix - t_res[r] * q_bg);
          ps->grad[idx] += grad;
          suffix += weights[idx] * qi;
        }
      }
    }
  };

  Var<Real> color_v = make_node<Real>(
      {rays, 3}, std::move(color), {sigma, rgb}, "composite_color",
      [backprop_common](Node<Real>& n) { backprop_common(n.grad.data(), nullptr); });
  Var<Real> depth_v = make_node<Real>(
      {rays, 1}, std::move(depth), {sigma, rgb}, "composite_depth",
      [backprop_common](Node<Real>& n) { backprop_common(nullptr, n.grad.data()); });

  return {color_v, depth_v, std::move(raw.weights), std::move(raw.t_res)};
}

// -------------------------------------------------------------- radiance MLP

template <class Real>
struct RadianceMlp {
  Linear<Real> l1, l2;
  int in_dim = 0, hidden = 0;

  static RadianceMlp init(int in_dim, int hidden, Rng& rng) {
    RadianceMlp m;
    m.in_dim = in_dim;
    m.hidden = hidden;
    m.l1 = Linear<Real>::init(in_dim, hidden, rng);
    m.l2 = Linear<Real>::init(hidden, 4, rng);
    return m;
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    l1.collect(out, prefix + ".l1");
    l2.collect(out, prefix + ".l2");
  }
};

template <class Real>
struct FieldSample {
  Var<Real> sigma;  // [N, 1], softplus-activated (nonnegative)
  Var<Real> rgb;    // [N, 3], sigmoid-activated
};

// Density and color at each 3D point from triplane features through the
// two-layer MLP.
template <class Real>
FieldSample<Real> radiance_field(const Triplane<Real>& tp,
                                 const std::vector<Real>& points,
                                 const RadianceMlp<Real>& mlp) {
  Var<Real> feat = query_features(tp, points);
  Var<Real> out = mlp.l2(relu(mlp.l1(feat)));
  return {softplus(cols(out, 0, 1)), sigmoid(cols(out, 1, 4))};
}

// ------------------------------------------------------------------- render

struct RenderSpec {
  int resolution = 64;
  int coarse_samples = 8;
  int fine_samples = 8;
  std::uint64_t seed = 0;
};

template <class Real>
struct RenderResult {
  Var<Real> image;   // [res*res, 3]
  Var<Real> depth;   // [res*res, 1]
  Var<Real> sigma;   // fine-pass densities [rays, total_samples]
  std::vector<Real> weights;  // detached fine weights
  std::vector<Real> t_res;    // detached residual transmittance per ray
  std::vector<Real> t;        // fine sample depths, rays * total_samples
};

// Rays are parameterized by z-depth: t advances the point one scene unit
// along -Z regardless of ray obliquity, so depth maps agree with a z-buffer
// and [near, far] brackets the scene box exactly for every pixel.
template <class Real>
std::vector<Real> points_along_rays(const RayBatch& rb,
                                    const std::vector<Real>& t, int per_ray) {
  std::vector<Real> pts(t.size() * 3);
  for (int r = 0; r < rb.count; ++r) {
    double inv = -1.0 / rb.directions[3 * r + 2];  // dz < 0 by construction
    for (int i = 0; i < per_ray; ++i) {
      std::size_t k = std::size_t(r) * per_ray + i;
      for (int a = 0; a < 3; ++a)
        pts[3 * k + a] = Real(rb.origins[3 * r + a] + t[k] * inv * rb.directions[3 * r + a]);
    }
  }
  return pts;
}

// Full pipeline: rays -> coarse stratified pass (no grad) -> importance
// resampling -> fine radiance field -> composite.
template <class Real>
RenderResult<Real> render(const Triplane<Real>& tp, const RadianceMlp<Real>& mlp,
                          const Camera& cam, const RenderSpec& spec) {
  RayBatch rb = generate_rays(cam, spec.resolution);
  int rays = rb.count;
  int nc = spec.coarse_samples, nf = spec.fine_samples;
  int total = nc + nf;
  Real near_t = Real(cam.near_t), far_t = Real(cam.far_t);

  // coarse depths, one rng stream per pixel
  std::vector<Real> t_coarse(std::size_t(rays) * nc);
  for (int r = 0; r < rays; ++r) {
    Rng rng = Rng::stream(spec.seed, 0xC0A5u, rb.pixels[r]);
    auto tr = stratified_samples<Real>(nc, near_t, far_t, rng);
    std::copy(tr.begin(), tr.end(), t_coarse.begin() + std::size_t(r) * nc);
  }

  // coarse weights, forward only
  std::vector<Real> w_coarse;
  {
    NoGradGuard ng;
    auto pts = points_along_rays<Real>(rb, t_coarse, nc);
    FieldSample<Real> fs = radiance_field(tp, pts, mlp);
    auto raw = composite_weights(fs.sigma.data(), t_coarse, rays, nc, far_t);
    w_coarse = std::move(raw.weights);
  }

  // refined depths merged with coarse
  std::vector<Real> t_all(std::size_t(rays) * total);
  for (int r = 0; r < rays; ++r) {
    Rng rng = Rng::stream(spec.seed, 0xF13Eu, rb.pixels[r]);
    std::vector<Real> tc(t_coarse.begin() + std::size_t(r) * nc,
                         t_coarse.begin() + std::size_t(r + 1) * nc);
    std::vector<Real> wc(w_coarse.begin() + std::size_t(r) * nc,
                         w_coarse.begin() + std::size_t(r + 1) * nc);
    auto merged = importance_samples(tc, wc, nf, near_t, far_t, rng);
    std::copy(merged.begin(), merged.end(), t_all.begin() + std::size_t(r) * total);
  }

  auto pts = points_along_rays<Real>(rb, t_all, total);
  FieldSample<Real> fs = radiance_field(tp, pts, mlp);
  Var<Real> sigma = reshape(fs.sigma, {rays, total});
  CompositeOut<Real> co = composite(sigma, fs.rgb, t_all, far_t);

  RenderResult<Real> out;
  out.image = co.color;
  out.depth = co.depth;
  out.sigma = sigma;
  out.weights = std::move(co.weights);
  out.t_res = std::move(co.t_res);
  out.t = std::move(t_all);
  return out;
}

// --------------------------------------------- no-triplane ablation decoder

// Direct convolutional decoder from the encoder grid to image + depth:
// repeated (2x upsample + 3x3 conv) blocks, then a head conv to 4 channels.
template <class Real>
struct ConvDecoder {
  int g = 8, out_res = 64, C = 32, in_dim = 512;
  Linear<Real> to_feat;
  std::vector<Conv3x3Layer<Real>> convs;
  Conv3x3Layer<Real> head;

  static ConvDecoder init(int g, int out_res, int C, int in_dim, Rng& rng) {
    int side = g, k = 0;
    while (side < out_res) { side *= 2; ++k; }
    if (side != out_res || k < 1)
      throw ConfigError("conv decoder: render resolution must be grid * 2^k");
    ConvDecoder d;
    d.g = g; d.out_res = out_res; d.C = C; d.in_dim = in_dim;
    d.to_feat = Linear<Real>::init(in_dim, C, rng);
    for (int i = 0; i < k; ++i) d.convs.push_back(Conv3x3Layer<Real>::init(C, C, rng));
    d.head = Conv3x3Layer<Real>::init(C, 4, rng);
    return d;
  }

  // -> image [res*res, 3] in [0,1], depth [res*res, 1] in [near, far]
  std::pair<Var<Real>, Var<Real>> decode(const FeatureMap<Real>& h, Real near_t,
                                         Real far_t) const {
    Var<Real> x = reshape(to_feat(h.grid), {1, g, g, C});
    for (const auto& cv : convs) x = gelu(cv(upsample2x(x)));
    Var<Real> o = reshape(head(x), {out_res * out_res, 4});
    Var<Real> img = sigmoid(cols(o, 0, 3));
    Var<Real> dep = add_scalar(scale(sigmoid(cols(o, 3, 4)), far_t - near_t), near_t);
    return {img, dep};
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    to_feat.collect(out, prefix + ".to_feat");
    for (std::size_t i = 0; i < convs.size(); ++i)
      convs[i].collect(out, prefix + ".conv" + std::to_string(i));
    head.collect(out, prefix + ".head");
  }
};

}  // namespace tp

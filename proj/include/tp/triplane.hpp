#pragma once

#include <array>
#include <vector>

#include "tp/encoder.hpp"
#include "tp/ops_spatial.hpp"

// Decoder from the image representation to triplane features: learnable
// embeddings cross-attend into the encoder grid, giving low-resolution
// planes that a stack of (2x bilinear upsample + 3x3 conv + gelu) blocks
// brings to full resolution. Queries project a 3D point onto the three
// axis-aligned planes, bilinearly sample each, and sum.

namespace tp {

struct TriplaneConfig {
  int r = 8;         // low-res plane side
  int R = 32;        // full-res plane side
  int C = 32;        // plane channels
  int emb_dim = 64;  // embedding / attention width
  int heads = 4;
  int in_dim = 512;  // encoder feature dim

  int upsample_blocks() const {
    int side = r, k = 0;
    while (side < R) { side *= 2; ++k; }
    if (side != R || k < 1)
      throw ConfigError("triplane: R must be r * 2^k with k >= 1");
    return k;
  }
};

template <class Real>
struct Triplane {
  std::array<Var<Real>, 3> planes;  // XY, XZ, YZ, each [R,R,C]
  int R = 0, C = 0;
};

template <class Real>
struct TriplaneDecoder {
  TriplaneConfig cfg;
  Var<Real> xi;  // [3*r*r, emb_dim] learnable triplane embeddings
  MultiHeadAttention<Real> cross;
  Linear<Real> to_feat;                 // emb_dim -> C
  std::vector<Conv3x3Layer<Real>> convs;  // one per upsample block, C -> C
  Conv3x3Layer<Real> out_conv;            // final 3x3 conv, C -> C

  static TriplaneDecoder init(const TriplaneConfig& cfg, Rng& rng) {
    cfg.upsample_blocks();  // validates r/R
    TriplaneDecoder d;
    d.cfg = cfg;
    d.xi = init_weight<Real>({3 * cfg.r * cfg.r, cfg.emb_dim}, rng);
    d.cross = MultiHeadAttention<Real>::init(cfg.emb_dim, cfg.in_dim, cfg.emb_dim,
                                             cfg.heads, rng);
    d.to_feat = Linear<Real>::init(cfg.emb_dim, cfg.C, rng);
    for (int i = 0; i < cfg.upsample_blocks(); ++i)
      d.convs.push_back(Conv3x3Layer<Real>::init(cfg.C, cfg.C, rng));
    d.out_conv = Conv3x3Layer<Real>::init(cfg.C, cfg.C, rng);
    return d;
  }

  Triplane<Real> decode(const FeatureMap<Real>& h) const {
    contract(h.grid.defined() && h.grid.cols() == cfg.in_dim,
             "decode: feature dim does not match decoder config");
    Var<Real> attended = cross(xi, h.grid);         // [3r^2, emb]
    Var<Real> feat = to_feat(attended);             // [3r^2, C]
    Var<Real> x = reshape(feat, {3, cfg.r, cfg.r, cfg.C});
    for (const auto& cv : convs) x = gelu(cv(upsample2x(x)));
    x = out_conv(x);

    Triplane<Real> tp;
    tp.R = cfg.R;
    tp.C = cfg.C;
    Var<Real> flat = reshape(x, {3, cfg.R * cfg.R * cfg.C});
    for (int p = 0; p < 3; ++p)
      tp.planes[p] = reshape(rows(flat, p, p + 1), {cfg.R, cfg.R, cfg.C});
    return tp;
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".xi", xi);
    cross.collect(out, prefix + ".cross");
    to_feat.collect(out, prefix + ".to_feat");
    for (std::size_t i = 0; i < convs.size(); ++i)
      convs[i].collect(out, prefix + ".conv" + std::to_string(i));
    out_conv.collect(out, prefix + ".out_conv");
  }
};

// Sum of the three plane samples at each point. points: [N,3] in [-1,1]^3.
template <class Real>
Var<Real> query_features(const Triplane<Real>& tp, const std::vector<Real>& points) {
  contract(points.size() % 3 == 0, "query_features: points must be Nx3");
  int n = static_cast<int>(points.size() / 3);
  std::vector<Real> cxy(std::size_t(n) * 2), cxz(cxy.size()), cyz(cxy.size());
  for (int i = 0; i < n; ++i) {
    Real x = points[3 * i], y = points[3 * i + 1], z = points[3 * i + 2];
    cxy[2 * i] = x; cxy[2 * i + 1] = y;   // XY plane drops z
    cxz[2 * i] = x; cxz[2 * i + 1] = z;   // XZ plane drops y
    cyz[2 * i] = y; cyz[2 * i + 1] = z;   // YZ plane drops x
  }
  Var<Real> s0 = bilinear_sample(tp.planes[0], Var<Real>::constant({n, 2}, std::move(cxy)));
  Var<Real> s1 = bilinear_sample(tp.planes[1], Var<Real>::constant({n, 2}, std::move(cxz)));
  Var<Real> s2 = bilinear_sample(tp.planes[2], Var<Real>::constant({n, 2}, std::move(cyz)));
  return add(add(s0, s1), s2);
}

}  // namespace tp

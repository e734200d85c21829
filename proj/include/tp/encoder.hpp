#pragma once

#include <vector>

#include "tp/nn.hpp"

// Tiny ViT producing the grid representation consumed by the triplane
// decoder plus a pooled vector for probing. Class and patch tokens are
// collected from the last four blocks; per block the class token is
// broadcast-concatenated channelwise onto every patch token, and the four
// blocks are concatenated along channels, giving D = 8 * width.

namespace tp {

struct EncoderConfig {
  int image_size = 64;
  int patch_size = 8;
  int depth = 6;
  int width = 64;
  int heads = 4;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int feat_dim() const { return 8 * width; }  // 4 blocks x (patch | class)

  void validate() const {
    contract(image_size > 0 && patch_size > 0 && image_size % patch_size == 0,
             "encoder: image_size must be divisible by patch_size");
    contract(depth >= 4, "encoder: need at least 4 blocks to tap the last four");
    contract(width % heads == 0, "encoder: width not divisible by heads");
  }
};

template <class Real>
struct FeatureMap {
  Var<Real> grid;    // [g*g, D]
  Var<Real> pooled;  // [1, D], mean over grid positions
  int g = 0;
  int dim = 0;
};

template <class Real>
struct VitEncoder {
  EncoderConfig cfg;
  Linear<Real> patch_proj;  // patch_dim -> width
  Var<Real> pos;            // [n_patches + 1, width], learned, slot 0 = class
  Var<Real> cls;            // [1, width]
  std::vector<TransformerBlock<Real>> blocks;

  static VitEncoder init(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    VitEncoder e;
    e.cfg = cfg;
    e.patch_proj = Linear<Real>::init(cfg.patch_dim(), cfg.width, rng);
    e.pos = init_weight<Real>({cfg.n_patches() + 1, cfg.width}, rng);
    e.cls = init_weight<Real>({1, cfg.width}, rng);
    for (int i = 0; i < cfg.depth; ++i)
      e.blocks.push_back(TransformerBlock<Real>::init(cfg.width, cfg.heads, rng));
    return e;
  }

  // image: row-major [S, S, 3] values in [0,1].
  Var<Real> patchify(const std::vector<Real>& image) const {
    int S = cfg.image_size, P = cfg.patch_size, g = cfg.grid();
    contract(static_cast<int>(image.size()) == S * S * 3,
             "encode: image size does not match config");
    std::vector<Real> v(std::size_t(cfg.n_patches()) * cfg.patch_dim());
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px) {
        Real* dst = v.data() + (std::size_t(py) * g + px) * cfg.patch_dim();
        for (int y = 0; y < P; ++y)
          for (int x = 0; x < P; ++x)
            for (int c = 0; c < 3; ++c)
              dst[(y * P + x) * 3 + c] =
                  image[((std::size_t(py) * P + y) * S + (px * P + x)) * 3 + c];
      }
    return Var<Real>::constant({cfg.n_patches(), cfg.patch_dim()}, std::move(v));
  }

  FeatureMap<Real> encode(const std::vector<Real>& image) const {
    int n = cfg.n_patches();
    Var<Real> tokens = patch_proj(patchify(image));
    Var<Real> all = concat_rows(std::vector<Var<Real>>{cls, tokens});
    Var<Real> x = add(all, pos);

    std::vector<Var<Real>> taps;
    for (int i = 0; i < cfg.depth; ++i) {
      x = blocks[i](x);
      if (i >= cfg.depth - 4) {
        Var<Real> patch_tok = rows(x, 1, n + 1);
        Var<Real> cls_tok = tile_rows(rows(x, 0, 1), n);
        taps.push_back(concat_cols(std::vector<Var<Real>>{patch_tok, cls_tok}));
      }
    }
    Var<Real> grid = concat_cols(taps);  // [n, 8*width]
    std::vector<Real> ones(n, Real(1) / Real(n));
    Var<Real> pool_w = Var<Real>::constant({1, n}, std::move(ones));
    Var<Real> pooled = matmul(pool_w, grid);
    return {grid, pooled, cfg.grid(), cfg.feat_dim()};
  }

  void collect(ParamList<Real>& out, const std::string& prefix) const {
    patch_proj.collect(out, prefix + ".patch");
    out.emplace_back(prefix + ".pos", pos);
    out.emplace_back(prefix + ".cls", cls);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(out, prefix + ".block" + std::to_string(i));
  }
};

}  // namespace tp

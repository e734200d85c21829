#pragma once

#include <cmath>
#include <vector>

#include "tp/ops.hpp"

// Spatial primitives: 3x3 convolution (stride 1, pad 1), 2x bilinear
// upsampling, and bilinear plane sampling. Layout is channels-last
// [B, H, W, C] row-major throughout.

namespace tp {

namespace detail {

// col is [H*W, Cin*9]; inner index ci*9 + ky*3 + kx.
template <class Real>
void im2col3x3(const Real* x, int H, int W, int Cin, Real* col) {
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx) {
      Real* dst = col + (std::size_t(y) * W + xx) * (Cin * 9);
      for (int ci = 0; ci < Cin; ++ci)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            int sy = y + ky - 1, sx = xx + kx - 1;
            Real v = (sy >= 0 && sy < H && sx >= 0 && sx < W)
                         ? x[(std::size_t(sy) * W + sx) * Cin + ci]
                         : Real(0);
            dst[ci * 9 + ky * 3 + kx] = v;
          }
    }
}

template <class Real>
void col2im3x3_accum(const Real* col, int H, int W, int Cin, Real* dx) {
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx) {
      const Real* src = col + (std::size_t(y) * W + xx) * (Cin * 9);
      for (int ci = 0; ci < Cin; ++ci)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            int sy = y + ky - 1, sx = xx + kx - 1;
            if (sy >= 0 && sy < H && sx >= 0 && sx < W)
              dx[(std::size_t(sy) * W + sx) * Cin + ci] += src[ci * 9 + ky * 3 + kx];
          }
    }
}

}  // namespace detail

// x: [B,H,W,Cin], w: [Cout, Cin*9], b: [Cout] -> [B,H,W,Cout]
template <class Real>
Var<Real> conv3x3(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b) {
  contract(x.shape().size() == 4, "conv3x3: input rank != 4");
  int B = x.shape()[0], H = x.shape()[1], W = x.shape()[2], Cin = x.shape()[3];
  contract(w.shape().size() == 2 && w.shape()[1] == Cin * 9,
           "conv3x3: weight shape mismatch");
  int Cout = w.shape()[0];
  contract(static_cast<int>(b.size()) == Cout, "conv3x3: bias size mismatch");

  std::size_t plane_in = std::size_t(H) * W * Cin;
  std::size_t plane_out = std::size_t(H) * W * Cout;
  std::vector<Real> v(std::size_t(B) * plane_out);
  std::vector<Real> col(std::size_t(H) * W * Cin * 9);
  for (int bi = 0; bi < B; ++bi) {
    detail::im2col3x3(x.data().data() + bi * plane_in, H, W, Cin, col.data());
    Real* out = v.data() + bi * plane_out;
    kernels::gemm<Real>(false, true, H * W, Cout, Cin * 9, col.data(), w.data().data(),
                        out, false);
    for (int p = 0; p < H * W; ++p)
      kernels::add(out + std::size_t(p) * Cout, b.data().data(),
                   out + std::size_t(p) * Cout, Cout);
  }
  return make_node<Real>({B, H, W, Cout}, std::move(v), {x, w, b}, "conv3x3",
      [x, w, b, B, H, W, Cin, Cout, plane_in, plane_out](Node<Real>& n) {
        auto* px = x.node().get();
        auto* pw = w.node().get();
        auto* pb = b.node().get();
        std::vector<Real> col(std::size_t(H) * W * Cin * 9);
        std::vector<Real> dcol(px->grad.empty() ? 0 : col.size());
        for (int bi = 0; bi < B; ++bi) {
          const Real* g = n.grad.data() + bi * plane_out;
          if (!pw->grad.empty() || !px->grad.empty())
            detail::im2col3x3(px->val.data() + bi * plane_in, H, W, Cin, col.data());
          if (!pw->grad.empty())
            kernels::gemm<Real>(true, false, Cout, Cin * 9, H * W, g, col.data(),
                                pw->grad.data(), true);
          if (!pb->grad.empty())
            for (int p = 0; p < H * W; ++p)
              kernels::add(pb->grad.data(), g + std::size_t(p) * Cout, pb->grad.data(), Cout);
          if (!px->grad.empty()) {
            kernels::gemm<Real>(false, false, H * W, Cin * 9, Cout, g, pw->val.data(),
                                dcol.data(), false);
            detail::col2im3x3_accum(dcol.data(), H, W, Cin,
                                    px->grad.data() + bi * plane_in);
          }
        }
      });
}

// [B,H,W,C] -> [B,2H,2W,C], bilinear, half-pixel centers.
template <class Real>
Var<Real> upsample2x(const Var<Real>& x) {
  contract(x.shape().size() == 4, "upsample2x: input rank != 4");
  int B = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
  int H2 = 2 * H, W2 = 2 * W;

  auto taps = [](int o, int n, int& i0, int& i1, Real& w1) {
    Real s = Real(o) * Real(0.5) - Real(0.25);
    Real f = std::floor(s);
    i0 = static_cast<int>(f);
    w1 = s - f;
    i1 = i0 + 1;
    if (i0 < 0) { i0 = 0; }
    if (i1 < 0) { i1 = 0; }
    if (i0 > n - 1) i0 = n - 1;
    if (i1 > n - 1) i1 = n - 1;
  };

  std::vector<Real> v(std::size_t(B) * H2 * W2 * C);
  for (int bi = 0; bi < B; ++bi)
    for (int y = 0; y < H2; ++y) {
      int y0, y1; Real wy;
      taps(y, H, y0, y1, wy);
      for (int xx = 0; xx < W2; ++xx) {
        int x0, x1; Real wx;
        taps(xx, W, x0, x1, wx);
        const Real* base = x.data().data() + std::size_t(bi) * H * W * C;
        Real* out = v.data() + ((std::size_t(bi) * H2 + y) * W2 + xx) * C;
        const Real* p00 = base + (std::size_t(y0) * W + x0) * C;
        const Real* p01 = base + (std::size_t(y0) * W + x1) * C;
        const Real* p10 = base + (std::size_t(y1) * W + x0) * C;
        const Real* p11 = base + (std::size_t(y1) * W + x1) * C;
        for (int c = 0; c < C; ++c)
          out[c] = (1 - wy) * ((1 - wx) * p00[c] + wx * p01[c]) +
                   wy * ((1 - wx) * p10[c] + wx * p11[c]);
      }
    }
  return make_node<Real>({B, H2, W2, C}, std::move(v), {x}, "upsample2x",
      [x, B, H, W, C, H2, W2, taps](Node<Real>& n) {
        auto* px = x.node().get();
        if (px->grad.empty()) return;
        for (int bi = 0; bi < B; ++bi)
          for (int y = 0; y < H2; ++y) {
            int y0, y1; Real wy;
            taps(y, H, y0, y1, wy);
            for (int xx = 0; xx < W2; ++xx) {
              int x0, x1; Real wx;
              taps(xx, W, x0, x1, wx);
              Real* base = px->grad.data() + std::size_t(bi) * H * W * C;
              const Real* g = n.grad.data() + ((std::size_t(bi) * H2 + y) * W2 + xx) * C;
              for (int c = 0; c < C; ++c) {
                base[(std::size_t(y0) * W + x0) * C + c] += (1 - wy) * (1 - wx) * g[c];
                base[(std::size_t(y0) * W + x1) * C + c] += (1 - wy) * wx * g[c];
                base[(std::size_t(y1) * W + x0) * C + c] += wy * (1 - wx) * g[c];
                base[(std::size_t(y1) * W + x1) * C + c] += wy * wx * g[c];
              }
            }
          }
      });
}

// plane: [R,R,C]; coords: [N,2] in [-1,1]^2 (clamped); -> [N,C].
// coords[n] = (cx, cy); cx indexes columns, cy rows; grid nodes sit at
// coord = -1 + 2*i/(R-1) so integer grid queries are exact.
template <class Real>
Var<Real> bilinear_sample(const Var<Real>& plane, const Var<Real>& coords) {
  contract(plane.shape().size() == 3 && plane.shape()[0] == plane.shape()[1],
           "bilinear_sample: plane must be [R,R,C]");
  int R = plane.shape()[0], C = plane.shape()[2];
  contract(R >= 2, "bilinear_sample: plane side < 2");
  contract(coords.shape().size() == 2 && coords.shape()[1] == 2,
           "bilinear_sample: coords must be [N,2]");
  int N = coords.shape()[0];

  struct Tap { int x0, y0; Real fx, fy; bool cx_clamped, cy_clamped; };
  std::vector<Tap> taps(N);
  std::vector<Real> v(std::size_t(N) * C);
  const Real half = Real(0.5) * (R - 1);
  for (int i = 0; i < N; ++i) {
    Real cx = coords.data()[2 * i], cy = coords.data()[2 * i + 1];
    contract(std::isfinite(cx) && std::isfinite(cy), "bilinear_sample: non-finite coord");
    Tap& t = taps[i];
    t.cx_clamped = cx < -1 || cx > 1;
    t.cy_clamped = cy < -1 || cy > 1;
    cx = std::clamp(cx, Real(-1), Real(1));
    cy = std::clamp(cy, Real(-1), Real(1));
    Real u = (cx + 1) * half, w = (cy + 1) * half;
    int x0 = std::min(static_cast<int>(std::floor(u)), R - 2);
    int y0 = std::min(static_cast<int>(std::floor(w)), R - 2);
    t.x0 = x0; t.y0 = y0; t.fx = u - x0; t.fy = w - y0;
    const Real* p = plane.data().data();
    const Real* p00 = p + (std::size_t(y0) * R + x0) * C;
    const Real* p01 = p00 + C;
    const Real* p10 = p00 + std::size_t(R) * C;
    const Real* p11 = p10 + C;
    Real* out = v.data() + std::size_t(i) * C;
    for (int c = 0; c < C; ++c)
      out[c] = (1 - t.fy) * ((1 - t.fx) * p00[c] + t.fx * p01[c]) +
               t.fy * ((1 - t.fx) * p10[c] + t.fx * p11[c]);
  }
  return make_node<Real>({N, C}, std::move(v), {plane, coords}, "bilinear_sample",
      [plane, coords, R, C, N, half, taps = std::move(taps)](Node<Real>& n) {
        auto* pp = plane.node().get();
        auto* pc = coords.node().get();
        for (int i = 0; i < N; ++i) {
          const Tap& t = taps[i];
          const Real* g = n.grad.data() + std::size_t(i) * C;
          std::size_t i00 = (std::size_t(t.y0) * R + t.x0) * C;
          if (!pp->grad.empty()) {
            Real* gp = pp->grad.data();
            for (int c = 0; c < C; ++c) {
              gp[i00 + c] += (1 - t.fy) * (1 - t.fx) * g[c];
              gp[i00 + C + c] += (1 - t.fy) * t.fx * g[c];
              gp[i00 + std::size_t(R) * C + c] += t.fy * (1 - t.fx) * g[c];
              gp[i00 + std::size_t(R) * C + C + c] += t.fy * t.fx * g[c];
            }
          }
          if (!pc->grad.empty()) {
            const Real* p = pp->val.data();
            const Real* p00 = p + i00;
            const Real* p01 = p00 + C;
            const Real* p10 = p00 + std::size_t(R) * C;
            const Real* p11 = p10 + C;
            Real du = 0, dw = 0;
            for (int c = 0; c < C; ++c) {
              du += g[c] * ((1 - t.fy) * (p01[c] - p00[c]) + t.fy * (p11[c] - p10[c]));
              dw += g[c] * ((1 - t.fx) * (p10[c] - p00[c]) + t.fx * (p11[c] - p01[c]));
            }
            if (!t.cx_clamped) pc->grad[2 * i] += du * half;
            if (!t.cy_clamped) pc->grad[2 * i + 1] += dw * half;
          }
        }
      });
}

}  // namespace tp

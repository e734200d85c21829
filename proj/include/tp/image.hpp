#pragma once

#include <cmath>
#include <vector>

#include "tp/error.hpp"
#include "tp/rng.hpp"

// Float image buffers (row-major, channels-last, values nominally [0,1])
// plus the geometric transforms used for augmentation.

namespace tp {

struct Image {
  int w = 0, h = 0, c = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w_, int h_, int c_) : w(w_), h(h_), c(c_), data(std::size_t(w_) * h_ * c_) {}

  float& at(int x, int y, int ch) { return data[(std::size_t(y) * w + x) * c + ch]; }
  float at(int x, int y, int ch) const { return data[(std::size_t(y) * w + x) * c + ch]; }
};

// Bilinear resize with half-pixel-centered sampling.
inline Image resize_bilinear(const Image& src, int w, int h) {
  contract(src.w > 0 && src.h > 0 && w > 0 && h > 0, "resize: empty image");
  Image out(w, h, src.c);
  double sx = double(src.w) / w, sy = double(src.h) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double fx = (x + 0.5) * sx - 0.5, fy = (y + 0.5) * sy - 0.5;
      int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
      double ux = fx - x0, uy = fy - y0;
      int x1 = std::min(x0 + 1, src.w - 1), y1 = std::min(y0 + 1, src.h - 1);
      x0 = std::max(x0, 0);
      y0 = std::max(y0, 0);
      for (int ch = 0; ch < src.c; ++ch) {
        double v = (1 - uy) * ((1 - ux) * src.at(x0, y0, ch) + ux * src.at(x1, y0, ch)) +
                   uy * ((1 - ux) * src.at(x0, y1, ch) + ux * src.at(x1, y1, ch));
        out.at(x, y, ch) = float(v);
      }
    }
  return out;
}

inline Image hflip(const Image& src) {
  Image out(src.w, src.h, src.c);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x)
      for (int ch = 0; ch < src.c; ++ch) out.at(x, y, ch) = src.at(src.w - 1 - x, y, ch);
  return out;
}

inline Image crop(const Image& src, int x0, int y0, int w, int h) {
  contract(x0 >= 0 && y0 >= 0 && x0 + w <= src.w && y0 + h <= src.h, "crop: out of bounds");
  Image out(w, h, src.c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < src.c; ++ch) out.at(x, y, ch) = src.at(x0 + x, y0 + y, ch);
  return out;
}

inline Image grayscale(const Image& src) {
  contract(src.c == 3, "grayscale: need 3 channels");
  Image out(src.w, src.h, 3);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      float g = 0.299f * src.at(x, y, 0) + 0.587f * src.at(x, y, 1) + 0.114f * src.at(x, y, 2);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = g;
    }
  return out;
}

}  // namespace tp

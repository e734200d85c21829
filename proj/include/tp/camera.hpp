#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "tp/error.hpp"

// Fixed pinhole camera at (0, 0, d) looking down -Z at the origin; the unit
// scene box [-1,1]^3 fills the frustum with the default distance/FOV.

namespace tp {

struct Camera {
  double focal = 0;        // pixels
  double cx = 0, cy = 0;   // principal point, pixels
  double distance = 2.7;   // camera center z
  double near_t = 1.7;
  double far_t = 3.7;
  int resolution = 0;

  static Camera make_default(int resolution, double fov_deg = 45.0,
                             double distance = 2.7, double near_t = 1.7,
                             double far_t = 3.7) {
    contract(resolution >= 2, "camera: resolution must be >= 2");
    contract(near_t > 0 && far_t > near_t, "camera: need 0 < near < far");
    Camera c;
    c.resolution = resolution;
    c.focal = 0.5 * resolution / std::tan(fov_deg * M_PI / 360.0);
    c.cx = 0.5 * resolution;
    c.cy = 0.5 * resolution;
    c.distance = distance;
    c.near_t = near_t;
    c.far_t = far_t;
    return c;
  }
};

struct RayBatch {
  std::vector<double> origins;     // N x 3
  std::vector<double> directions;  // N x 3, unit norm
  std::vector<int> pixels;         // pixel index y*res + x
  int count = 0;
};

// One ray per pixel through the pixel center. Pixel row 0 is the top of the
// image; world +Y is up.
inline RayBatch generate_rays(const Camera& cam, int resolution) {
  contract(resolution >= 2, "generate_rays: resolution must be >= 2");
  // intrinsics scale with the requested resolution
  Camera c = cam;
  if (resolution != cam.resolution) {
    double s = double(resolution) / cam.resolution;
    c.focal = cam.focal * s;
    c.cx = cam.cx * s;
    c.cy = cam.cy * s;
  }
  RayBatch rb;
  rb.count = resolution * resolution;
  rb.origins.resize(std::size_t(rb.count) * 3);
  rb.directions.resize(std::size_t(rb.count) * 3);
  rb.pixels.resize(rb.count);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      int i = y * resolution + x;
      double dx = (x + 0.5 - c.cx) / c.focal;
      double dy = (c.cy - (y + 0.5)) / c.focal;
      double dz = -1.0;
      double inv = 1.0 / std::sqrt(dx * dx + dy * dy + dz * dz);
      rb.origins[3 * i] = 0;
      rb.origins[3 * i + 1] = 0;
      rb.origins[3 * i + 2] = c.distance;
      rb.directions[3 * i] = dx * inv;
      rb.directions[3 * i + 1] = dy * inv;
      rb.directions[3 * i + 2] = dz * inv;
      rb.pixels[i] = i;
    }
  return rb;
}

}  // namespace tp

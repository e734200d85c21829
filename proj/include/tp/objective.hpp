#pragma once

#include "tp/ops.hpp"

// Training losses: appearance and depth reconstruction (per-element mean
// squared error), feature distillation against a frozen teacher, and an L1
// penalty on queried densities. Loss magnitudes are per-element means so
// they stay comparable across resolutions and sample counts.

namespace tp {

template <class Real>
struct LossWeights {
  Real rgb = Real(0.1);
  Real depth = Real(1);
  Real dist = Real(1);
  Real norm = Real(1e-3);

  void validate() const {
    if (rgb < 0 || depth < 0 || dist < 0 || norm < 0)
      throw ConfigError("loss weights must be nonnegative");
  }
};

template <class Real>
struct LossReport {
  Var<Real> rgb, depth, dist, norm, total;
};

template <class Real>
Var<Real> rgb_loss(const Var<Real>& target, const Var<Real>& rec) {
  return mse_loss(rec, target);
}

template <class Real>
Var<Real> depth_loss(const Var<Real>& target, const Var<Real>& rec) {
  return mse_loss(rec, target);
}

// Mean over all queried points of |sigma|; sigma is already nonnegative.
template <class Real>
Var<Real> density_norm_loss(const Var<Real>& sigma) {
  return mean_all(sigma);
}

// Per-element mean squared difference between student and teacher grids.
// The teacher side must carry no gradient.
template <class Real>
Var<Real> distillation_loss(const Var<Real>& student_grid,
                            const Var<Real>& teacher_grid) {
  contract(!teacher_grid.requires_grad(),
           "distillation: teacher features must be detached");
  return mse_loss(student_grid, teacher_grid);
}

template <class Real>
LossReport<Real> total_loss(const Var<Real>& rgb, const Var<Real>& depth,
                            const Var<Real>& dist, const Var<Real>& norm,
                            const LossWeights<Real>& w) {
  w.validate();
  LossReport<Real> r;
  r.rgb = rgb;
  r.depth = depth;
  r.dist = dist;
  r.norm = norm;
  r.total = add(add(scale(rgb, w.rgb), scale(depth, w.depth)),
                add(scale(dist, w.dist), scale(norm, w.norm)));
  return r;
}

}  // namespace tp

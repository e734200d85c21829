#pragma once

#include <array>
#include <string>
#include <vector>

#include "tp/camera.hpp"
#include "tp/image.hpp"

// Procedural synthetic scenes: primitive arrangements inside the unit box
// with flat-shaded procedural textures and analytic per-pixel depth. Eight
// shape classes (what is arranged) cross eight texture classes (how it is
// painted); in the ordinary dataset the two coincide so that appearance is
// a perfect shortcut for shape, while the cue-conflict set decouples them.

namespace tp {

constexpr int kShapeClasses = 8;
constexpr int kTextureClasses = 8;

enum class PrimKind { Sphere, Box, Plane };

struct Primitive {
  PrimKind kind = PrimKind::Sphere;
  // Sphere: center + radius in size[0]. Box: center + half extents.
  // Plane: z = center z (fronto-parallel, spans the box in x/y).
  std::array<double, 3> center = {0, 0, 0};
  std::array<double, 3> size = {0.3, 0.3, 0.3};
};

struct SceneSpec {
  std::vector<Primitive> prims;
  int shape_class = 0;
  int texture_class = 0;
  std::uint64_t seed = 0;
};

struct DatasetItem {
  int idx = 0;
  int shape_class = 0;
  int texture_class = 0;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::vector<DatasetItem> items;
  std::uint64_t seed = 0;
  std::string root;
};

// Scene construction. texture_class defaults to shape_class (the shortcut
// coupling); cue-conflict specs pass an explicit different class.
SceneSpec make_scene(int shape_class, int texture_class, std::uint64_t seed);

// Analytic render: nearest-hit flat-shaded color (black background) and
// depth along the ray, clamped to [near, far] (far where nothing is hit).
void render_scene(const SceneSpec& spec, const Camera& cam, int resolution,
                  Image& image, Image& depth);

// Balanced dataset under root/train plus manifest.tsv; deterministic in seed.
DatasetManifest make_dataset(const std::string& root, int n, std::uint64_t seed);

// Shape and texture classes drawn from different classes, near-uniform over
// ordered pairs; written under root/cueconflict.
DatasetManifest make_cue_conflict(const std::string& root, int n, std::uint64_t seed);

DatasetManifest read_manifest(const std::string& root, const std::string& subdir);

// Re-render the image of an item with a different texture class (geometry
// and depth unchanged) — the texture-swap perturbation.
void render_texture_swap(const DatasetItem& item, int new_texture_class,
                         const Camera& cam, int resolution, Image& image);

}  // namespace tp

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tp/io.hpp"
#include "tp/scenegen.hpp"

namespace fs = std::filesystem;

namespace tp {

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  std::array<double, 3> p = {0, 0, 0};
  bool ok = false;
};

Hit intersect(const Primitive& pr, const double* o, const double* d) {
  Hit h;
  switch (pr.kind) {
    case PrimKind::Sphere: {
      double oc[3] = {o[0] - pr.center[0], o[1] - pr.center[1], o[2] - pr.center[2]};
      double r = pr.size[0];
      double a2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];  // d need not be unit
      double b = oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2];
      double c = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - r * r;
      double disc = b * b - a2 * c;
      if (disc < 0) return h;
      double t = (-b - std::sqrt(disc)) / a2;
      if (t <= 1e-6) return h;
      h.t = t;
      h.ok = true;
      break;
    }
    case PrimKind::Box: {
      double t0 = 1e-6, t1 = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        double lo = pr.center[a] - pr.size[a], hi = pr.center[a] + pr.size[a];
        if (std::abs(d[a]) < 1e-12) {
          if (o[a] < lo || o[a] > hi) return h;
          continue;
        }
        double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return h;
      }
      h.t = t0;
      h.ok = true;
      break;
    }
    case PrimKind::Plane: {
      if (std::abs(d[2]) < 1e-12) return h;
      double t = (pr.center[2] - o[2]) / d[2];
      if (t <= 1e-6) return h;
      double x = o[0] + t * d[0], y = o[1] + t * d[1];
      if (std::abs(x) > 1.0 || std::abs(y) > 1.0) return h;
      h.t = t;
      h.ok = true;
      break;
    }
  }
  if (h.ok)
    for (int a = 0; a < 3; ++a) h.p[a] = o[a] + h.t * d[a];
  return h;
}

struct Palette {
  std::array<float, 3> a, b;
};

// two palettes shared by the four texture families
const Palette kPalettes[2] = {
    {{0.90f, 0.20f, 0.20f}, {0.95f, 0.85f, 0.20f}},
    {{0.20f, 0.40f, 0.90f}, {0.20f, 0.90f, 0.50f}},
};

std::array<float, 3> texture_color(int texture_class, const std::array<double, 3>& p) {
  int family = texture_class / 2;       // checker | stripes | dots | solid
  const Palette& pal = kPalettes[texture_class % 2];
  bool primary = true;
  switch (family) {
    case 0: {  // checker in x/y
      int cx = int(std::floor((p[0] + 2.0) / 0.25));
      int cy = int(std::floor((p[1] + 2.0) / 0.25));
      primary = ((cx + cy) & 1) == 0;
      break;
    }
    case 1: {  // diagonal stripes
      primary = (int(std::floor((p[0] + p[1] + 4.0) / 0.2)) & 1) == 0;
      break;
    }
    case 2: {  // dots on a grid
      double fx = p[0] - 0.3 * std::floor(p[0] / 0.3) - 0.15;
      double fy = p[1] - 0.3 * std::floor(p[1] / 0.3) - 0.15;
      primary = fx * fx + fy * fy < 0.08 * 0.08;
      break;
    }
    default:  // solid
      primary = true;
  }
  return primary ? pal.a : pal.b;
}

}  // namespace

SceneSpec make_scene(int shape_class, int texture_class, std::uint64_t seed) {
  contract(shape_class >= 0 && shape_class < kShapeClasses, "make_scene: bad shape class");
  contract(texture_class >= 0 && texture_class < kTextureClasses, "make_scene: bad texture class");
  Rng rng = Rng::stream(seed, 0x5CE7Eu, std::uint64_t(shape_class));
  auto jit = [&](double s) { return rng.uniform(-s, s); };

  SceneSpec spec;
  spec.shape_class = shape_class;
  spec.texture_class = texture_class;
  spec.seed = seed;
  double cx = jit(0.15), cy = jit(0.15), cz = jit(0.15);

  auto sphere = [&](double x, double y, double z, double r) {
    Primitive p;
    p.kind = PrimKind::Sphere;
    p.center = {x, y, z};
    p.size = {r, r, r};
    spec.prims.push_back(p);
  };
  auto box = [&](double x, double y, double z, double hx, double hy, double hz) {
    Primitive p;
    p.kind = PrimKind::Box;
    p.center = {x, y, z};
    p.size = {hx, hy, hz};
    spec.prims.push_back(p);
  };

  switch (shape_class) {
    case 0:  // lone sphere
      sphere(cx, cy, cz, 0.35 + jit(0.08));
      break;
    case 1:  // lone box
      box(cx, cy, cz, 0.3 + jit(0.06), 0.3 + jit(0.06), 0.3 + jit(0.06));
      break;
    case 2: {  // fronto-parallel plane
      Primitive p;
      p.kind = PrimKind::Plane;
      p.center = {0, 0, cz * 2};
      spec.prims.push_back(p);
      break;
    }
    case 3: {  // horizontal sphere pair
      double r = 0.22 + jit(0.04);
      sphere(-0.4 + cx * 0.5, cy, cz, r);
      sphere(0.4 + cx * 0.5, cy, cz, r);
      break;
    }
    case 4: {  // vertical box stack
      double h = 0.2 + jit(0.04);
      box(cx, -0.35 + cy * 0.5, cz, 0.3, h, 0.25);
      box(cx, 0.35 + cy * 0.5, cz, 0.22, h, 0.25);
      break;
    }
    case 5:  // sphere resting on a box
      box(cx, -0.35 + cy * 0.3, cz, 0.35, 0.18, 0.3);
      sphere(cx, 0.15 + cy * 0.3, cz, 0.26 + jit(0.04));
      break;
    case 6: {  // diagonal sphere triple
      double r = 0.16 + jit(0.03);
      for (int i = -1; i <= 1; ++i) sphere(0.45 * i + cx * 0.3, 0.4 * i + cy * 0.3, cz, r);
      break;
    }
    default: {  // horizontal box pair
      double h = 0.22 + jit(0.04);
      box(-0.42 + cx * 0.4, cy, cz, h, 0.3, 0.25);
      box(0.42 + cx * 0.4, cy, cz, h, 0.3, 0.25);
    }
  }
  return spec;
}

void render_scene(const SceneSpec& spec, const Camera& cam, int resolution,
                  Image& image, Image& depth) {
  RayBatch rb = generate_rays(cam, resolution);
  image = Image(resolution, resolution, 3);
  depth = Image(resolution, resolution, 1);
  for (int i = 0; i < rb.count; ++i) {
    const double* o = rb.origins.data() + 3 * i;
    // z-depth ray parameterization, matching the volume renderer: scale the
    // direction so t advances one unit along -Z
    double inv = -1.0 / rb.directions[3 * i + 2];
    double d[3] = {rb.directions[3 * i] * inv, rb.directions[3 * i + 1] * inv,
                   rb.directions[3 * i + 2] * inv};
    Hit best;
    for (const auto& pr : spec.prims) {
      Hit h = intersect(pr, o, d);
      if (h.ok && h.t < best.t) best = h;
    }
    int x = i % resolution, y = i / resolution;
    if (best.ok) {
      auto c = texture_color(spec.texture_class, best.p);
      for (int ch = 0; ch < 3; ++ch) image.at(x, y, ch) = c[ch];
      depth.at(x, y, 0) = float(std::clamp(best.t, cam.near_t, cam.far_t));
    } else {
      depth.at(x, y, 0) = float(cam.far_t);
    }
  }
}

namespace {

constexpr int kDataResolution = 64;

std::string manifest_path(const std::string& root, const std::string& subdir) {
  // ordinary data: <root>/train/* with <root>/manifest.tsv; cue-conflict
  // mirrors the layout inside its own directory
  if (subdir == "train") return (fs::path(root) / "manifest.tsv").string();
  return (fs::path(root) / subdir / "manifest.tsv").string();
}

DatasetManifest write_items(const std::string& root, const std::string& subdir,
                            const std::vector<DatasetItem>& items, std::uint64_t seed) {
  fs::create_directories(fs::path(root) / subdir);
  Camera cam = Camera::make_default(kDataResolution);
  Image img, dep;
  for (const auto& it : items) {
    SceneSpec spec = make_scene(it.shape_class, it.texture_class, it.seed);
    render_scene(spec, cam, kDataResolution, img, dep);
    std::string base = (fs::path(root) / subdir / std::to_string(it.idx)).string();
    write_png(base + ".png", img);
    write_tpdm(base + ".tpdm", dep);
  }
  std::ofstream os(manifest_path(root, subdir));
  if (!os) throw IoError("make_dataset: cannot write manifest under " + root);
  for (const auto& it : items)
    os << it.idx << '\t' << it.shape_class << '\t' << it.texture_class << '\t'
       << it.seed << '\n';

  DatasetManifest m;
  m.items = items;
  m.seed = seed;
  m.root = (fs::path(root) / subdir).string();
  return m;
}

}  // namespace

DatasetManifest make_dataset(const std::string& root, int n, std::uint64_t seed) {
  contract(n >= kShapeClasses, "make_dataset: need at least one item per class");
  std::vector<DatasetItem> items(n);
  for (int i = 0; i < n; ++i) {
    items[i].idx = i;
    items[i].shape_class = i % kShapeClasses;  // balanced within 1
    items[i].texture_class = items[i].shape_class;
    items[i].seed = Rng::stream(seed, 0xDA7Au, std::uint64_t(i)).next_u64();
  }
  return write_items(root, "train", items, seed);
}

DatasetManifest make_cue_conflict(const std::string& root, int n, std::uint64_t seed) {
  static_assert(kShapeClasses >= 2);
  std::vector<DatasetItem> items(n);
  int pairs = kShapeClasses * (kShapeClasses - 1);
  for (int i = 0; i < n; ++i) {
    // cycle through all ordered (shape, texture) pairs for uniform coverage
    int pair = i % pairs;
    int shape = pair / (kShapeClasses - 1);
    int off = pair % (kShapeClasses - 1);
    items[i].idx = i;
    items[i].shape_class = shape;
    items[i].texture_class = (shape + 1 + off) % kTextureClasses;
    items[i].seed = Rng::stream(seed, 0xCCF1u, std::uint64_t(i)).next_u64();
  }
  return write_items(root, "cueconflict", items, seed);
}

DatasetManifest read_manifest(const std::string& root, const std::string& subdir) {
  std::ifstream is(manifest_path(root, subdir));
  if (!is) throw IoError("read_manifest: cannot open manifest under " + root);
  DatasetManifest m;
  m.root = (fs::path(root) / subdir).string();
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    DatasetItem it;
    ls >> it.idx >> it.shape_class >> it.texture_class >> it.seed;
    if (!ls) throw IoError("read_manifest: malformed row in " + root);
    m.items.push_back(it);
  }
  return m;
}

void render_texture_swap(const DatasetItem& item, int new_texture_class,
                         const Camera& cam, int resolution, Image& image) {
  SceneSpec spec = make_scene(item.shape_class, new_texture_class, item.seed);
  Image depth;
  render_scene(spec, cam, resolution, image, depth);
}

}  // namespace tp

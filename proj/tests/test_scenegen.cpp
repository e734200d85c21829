#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "tp/io.hpp"
#include "tp/scenegen.hpp"

using namespace tp;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("tp_scenegen_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool dirs_identical(const std::string& a, const std::string& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) names.push_back(fs::relative(e.path(), a).string());
  std::sort(names.begin(), names.end());
  for (const auto& n : names) {
    if (!fs::exists(fs::path(b) / n)) return false;
    if (slurp(fs::path(a) / n) != slurp(fs::path(b) / n)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("render_scene: empty scene is black with far depth") {
  SceneSpec spec;
  spec.shape_class = 0;
  spec.texture_class = 0;
  Camera cam = Camera::make_default(16);
  Image img, dep;
  render_scene(spec, cam, 16, img, dep);
  for (float v : img.data) CHECK(v == 0.0f);
  for (float v : dep.data) CHECK(v == doctest::Approx(cam.far_t));
}

TEST_CASE("render_scene: fronto-parallel plane depth is constant where covered") {
  SceneSpec spec;
  spec.shape_class = 2;
  spec.texture_class = 6;  // solid
  Primitive p;
  p.kind = PrimKind::Plane;
  p.center = {0, 0, 0.2};
  spec.prims.push_back(p);
  Camera cam = Camera::make_default(33);
  Image img, dep;
  render_scene(spec, cam, 33, img, dep);
  int covered = 0;
  for (float v : dep.data) {
    if (v < cam.far_t) {
      CHECK(v == doctest::Approx(2.5).epsilon(1e-6));
      ++covered;
    }
  }
  CHECK(covered > 33 * 33 / 2);
  // the optical-axis pixel certainly hits the plane
  CHECK(dep.at(16, 16, 0) == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("render_scene: on-axis sphere center depth is distance minus radius") {
  SceneSpec spec;
  spec.shape_class = 0;
  spec.texture_class = 6;
  Primitive p;
  p.kind = PrimKind::Sphere;
  p.center = {0, 0, 0.1};
  p.size = {0.35, 0.35, 0.35};
  spec.prims.push_back(p);
  Camera cam = Camera::make_default(65);
  Image img, dep;
  render_scene(spec, cam, 65, img, dep);
  // camera sits at z = 2.7; front of the sphere is at z = 0.45
  CHECK(dep.at(32, 32, 0) == doctest::Approx(2.7 - 0.1 - 0.35).epsilon(1e-9));
}

TEST_CASE("render_scene: texture change never changes depth") {
  Camera cam = Camera::make_default(32);
  for (int shape = 0; shape < kShapeClasses; ++shape) {
    Image img1, dep1, img2, dep2;
    render_scene(make_scene(shape, 0, 7), cam, 32, img1, dep1);
    render_scene(make_scene(shape, 5, 7), cam, 32, img2, dep2);
    REQUIRE(dep1.data.size() == dep2.data.size());
    for (std::size_t i = 0; i < dep1.data.size(); ++i) CHECK(dep1.data[i] == dep2.data[i]);
  }
}

TEST_CASE("make_scene: rejects out-of-range classes") {
  CHECK_THROWS_AS(make_scene(-1, 0, 1), ContractError);
  CHECK_THROWS_AS(make_scene(kShapeClasses, 0, 1), ContractError);
  CHECK_THROWS_AS(make_scene(0, kTextureClasses, 1), ContractError);
}

TEST_CASE("make_dataset: same seed twice gives byte-identical directories") {
  std::string a = temp_dir("det_a"), b = temp_dir("det_b");
  make_dataset(a, 16, 1);
  make_dataset(b, 16, 1);
  CHECK(dirs_identical(a, b));
  CHECK(dirs_identical(b, a));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("make_dataset: shape classes balanced within one item") {
  std::string root = temp_dir("balance");
  auto m = make_dataset(root, 20, 3);
  REQUIRE(int(m.items.size()) == 20);
  std::map<int, int> hist;
  for (const auto& it : m.items) ++hist[it.shape_class];
  int lo = 20, hi = 0;
  for (int k = 0; k < kShapeClasses; ++k) {
    lo = std::min(lo, hist[k]);
    hi = std::max(hi, hist[k]);
  }
  CHECK(hi - lo <= 1);
  fs::remove_all(root);
}

TEST_CASE("make_dataset: layout and manifest round-trip") {
  std::string root = temp_dir("layout");
  auto m = make_dataset(root, 9, 5);
  for (const auto& it : m.items) {
    CHECK(fs::exists(fs::path(root) / "train" / (std::to_string(it.idx) + ".png")));
    CHECK(fs::exists(fs::path(root) / "train" / (std::to_string(it.idx) + ".tpdm")));
  }
  CHECK(fs::exists(fs::path(root) / "manifest.tsv"));
  auto r = read_manifest(root, "train");
  REQUIRE(r.items.size() == m.items.size());
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    CHECK(r.items[i].idx == m.items[i].idx);
    CHECK(r.items[i].shape_class == m.items[i].shape_class);
    CHECK(r.items[i].texture_class == m.items[i].texture_class);
    CHECK(r.items[i].seed == m.items[i].seed);
  }
  fs::remove_all(root);
}

TEST_CASE("make_cue_conflict: labels always disagree and pairs are covered evenly") {
  std::string root = temp_dir("cue");
  int pairs = kShapeClasses * (kShapeClasses - 1);
  auto m = make_cue_conflict(root, pairs, 11);
  std::map<std::pair<int, int>, int> hist;
  for (const auto& it : m.items) {
    CHECK(it.shape_class != it.texture_class);
    ++hist[{it.shape_class, it.texture_class}];
  }
  CHECK(int(hist.size()) == pairs);  // every ordered pair exactly once
  for (const auto& [k, v] : hist) CHECK(v == 1);
  CHECK(fs::exists(fs::path(root) / "cueconflict" / "manifest.tsv"));
  auto r = read_manifest(root, "cueconflict");
  CHECK(r.items.size() == m.items.size());
  fs::remove_all(root);
}

TEST_CASE("render_texture_swap: same geometry, different texture") {
  DatasetItem it;
  it.idx = 0;
  it.shape_class = 1;
  it.texture_class = 1;
  it.seed = 9;
  Camera cam = Camera::make_default(32);
  Image base, dep, swapped;
  render_scene(make_scene(it.shape_class, it.texture_class, it.seed), cam, 32, base, dep);
  render_texture_swap(it, 4, cam, 32, swapped);
  double diff = 0;
  for (std::size_t i = 0; i < base.data.size(); ++i)
    diff = std::max<double>(diff, std::abs(base.data[i] - swapped.data[i]));
  CHECK(diff > 0.05);  // palette change shows up in the image
}

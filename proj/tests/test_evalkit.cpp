#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tp/evalkit.hpp"

using namespace tp;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("tp_evalkit_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

EncoderConfig micro_encoder() {
  EncoderConfig ec;
  ec.image_size = 16;
  ec.patch_size = 8;
  ec.depth = 4;
  ec.width = 8;
  ec.heads = 2;
  return ec;
}

VitEncoder<float> random_encoder(std::uint64_t seed) {
  Rng rng(seed);
  return VitEncoder<float>::init(micro_encoder(), rng);
}

Image solid_image(float v) {
  Image img(16, 16, 3);
  for (auto& x : img.data) x = v;
  return img;
}

Image noise_image(Rng& rng) {
  Image img(16, 16, 3);
  for (auto& x : img.data) x = float(rng.uniform());
  return img;
}

// manifest whose images are solid colors keyed by `color_of(item)`
DatasetManifest write_coded(const std::string& dir, const std::vector<DatasetItem>& items,
                            const std::vector<float>& colors) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.root = dir;
  m.items = items;
  for (std::size_t i = 0; i < items.size(); ++i)
    write_png((fs::path(dir) / (std::to_string(items[i].idx) + ".png")).string(),
              solid_image(colors[i]));
  return m;
}

float class_color(int k) { return float(k + 1) / 10.0f; }

DatasetManifest coded_train_set(const std::string& dir, int per_class) {
  std::vector<DatasetItem> items;
  std::vector<float> colors;
  int idx = 0;
  for (int rep = 0; rep < per_class; ++rep)
    for (int k = 0; k < kShapeClasses; ++k) {
      DatasetItem it;
      it.idx = idx++;
      it.shape_class = k;
      it.texture_class = k;
      it.seed = 0;
      items.push_back(it);
      colors.push_back(class_color(k));
    }
  return write_coded(dir, items, colors);
}

}  // namespace

TEST_CASE("probe: color-coded classes are perfectly separable") {
  std::string dir = temp_dir("sep");
  DatasetManifest m = coded_train_set(dir, 4);
  auto enc = random_encoder(1);
  auto [res, head] = linear_probe(enc, m, 7);
  CHECK(res.accuracy == 1.0);
  CHECK(res.train_n == 24);
  CHECK(res.val_n == 8);
  fs::remove_all(dir);
}

TEST_CASE("probe: random labels on unique images score near chance") {
  std::string dir = temp_dir("null");
  Rng rng(2);
  std::vector<DatasetItem> items;
  fs::create_directories(dir);
  for (int i = 0; i < 64; ++i) {
    DatasetItem it;
    it.idx = i;
    it.shape_class = int(rng.uniform_int(kShapeClasses));
    it.texture_class = it.shape_class;
    it.seed = 0;
    items.push_back(it);
    write_png((fs::path(dir) / (std::to_string(i) + ".png")).string(), noise_image(rng));
  }
  DatasetManifest m;
  m.root = dir;
  m.items = items;
  auto enc = random_encoder(3);
  auto [res, head] = linear_probe(enc, m, 11);
  // chance is 1/8; allow three binomial sigmas over the 16-item held-out split
  CHECK(res.accuracy < 0.125 + 3 * std::sqrt(0.125 * 0.875 / 16.0));
  fs::remove_all(dir);
}

TEST_CASE("probe: single-class training split is rejected") {
  std::string dir = temp_dir("single");
  std::vector<DatasetItem> items;
  std::vector<float> colors;
  for (int i = 0; i < 16; ++i) {
    DatasetItem it;
    it.idx = i;
    it.shape_class = 0;
    it.texture_class = 0;
    it.seed = 0;
    items.push_back(it);
    colors.push_back(0.5f);
  }
  DatasetManifest m = write_coded(dir, items, colors);
  auto enc = random_encoder(4);
  CHECK_THROWS_AS(linear_probe(enc, m, 1), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("probe: deterministic per seed") {
  std::string dir = temp_dir("det");
  DatasetManifest m = coded_train_set(dir, 3);
  auto enc = random_encoder(5);
  auto [r1, h1] = linear_probe(enc, m, 13);
  auto [r2, h2] = linear_probe(enc, m, 13);
  CHECK(r1.accuracy == r2.accuracy);
  REQUIRE(h1.w.size() == h2.w.size());
  for (std::size_t i = 0; i < h1.w.size(); ++i) CHECK(h1.w[i] == h2.w[i]);
  for (std::size_t i = 0; i < h1.b.size(); ++i) CHECK(h1.b[i] == h2.b[i]);
  fs::remove_all(dir);
}

TEST_CASE("shape_bias: texture-coded images give bias 0, shape-coded give bias 1") {
  std::string train_dir = temp_dir("bias_train");
  DatasetManifest train_m = coded_train_set(train_dir, 4);
  auto enc = random_encoder(6);
  auto [res, head] = linear_probe(enc, train_m, 3);
  REQUIRE(res.accuracy == 1.0);  // head decodes the color key exactly

  auto cue_items = [] {
    std::vector<DatasetItem> items;
    int idx = 0;
    for (int s = 0; s < kShapeClasses; ++s) {
      int t = (s + 3) % kShapeClasses;
      DatasetItem it;
      it.idx = idx++;
      it.shape_class = s;
      it.texture_class = t;
      it.seed = 0;
      items.push_back(it);
    }
    return items;
  }();

  std::string cue_t = temp_dir("bias_cue_t");
  std::vector<float> tex_colors, shape_colors;
  for (const auto& it : cue_items) {
    tex_colors.push_back(class_color(it.texture_class));
    shape_colors.push_back(class_color(it.shape_class));
  }
  DatasetManifest cue_tex = write_coded(cue_t, cue_items, tex_colors);
  ShapeBiasResult rt = shape_bias(enc, head, cue_tex, 16);
  CHECK(rt.texture_matches == int(cue_items.size()));
  CHECK(rt.shape_matches == 0);
  REQUIRE(rt.bias.has_value());
  CHECK(*rt.bias == 0.0);

  std::string cue_s = temp_dir("bias_cue_s");
  DatasetManifest cue_shape = write_coded(cue_s, cue_items, shape_colors);
  ShapeBiasResult rs = shape_bias(enc, head, cue_shape, 16);
  CHECK(rs.shape_matches == int(cue_items.size()));
  CHECK(rs.texture_matches == 0);
  REQUIRE(rs.bias.has_value());
  CHECK(*rs.bias == 1.0);

  // counts partition the set in both cases
  CHECK(rt.shape_matches + rt.texture_matches + rt.other == int(cue_items.size()));
  CHECK(rs.shape_matches + rs.texture_matches + rs.other == int(cue_items.size()));
  fs::remove_all(train_dir);
  fs::remove_all(cue_t);
  fs::remove_all(cue_s);
}

TEST_CASE("shape_bias: three shape hits and one texture hit give 0.75") {
  std::string train_dir = temp_dir("mix_train");
  DatasetManifest train_m = coded_train_set(train_dir, 4);
  auto enc = random_encoder(7);
  auto [res, head] = linear_probe(enc, train_m, 5);
  REQUIRE(res.accuracy == 1.0);

  std::vector<DatasetItem> items;
  std::vector<float> colors;
  for (int i = 0; i < 4; ++i) {
    DatasetItem it;
    it.idx = i;
    it.shape_class = i;
    it.texture_class = i + 4;
    it.seed = 0;
    items.push_back(it);
    // first three keyed by shape, last keyed by texture
    colors.push_back(class_color(i < 3 ? it.shape_class : it.texture_class));
  }
  std::string dir = temp_dir("mix_cue");
  DatasetManifest cue = write_coded(dir, items, colors);
  ShapeBiasResult r = shape_bias(enc, head, cue, 16);
  CHECK(r.shape_matches == 3);
  CHECK(r.texture_matches == 1);
  REQUIRE(r.bias.has_value());
  CHECK(*r.bias == doctest::Approx(0.75));
  fs::remove_all(train_dir);
  fs::remove_all(dir);
}

TEST_CASE("shape_bias: rejects items whose labels agree") {
  std::string dir = temp_dir("notcue");
  DatasetItem it;
  it.idx = 0;
  it.shape_class = 2;
  it.texture_class = 2;
  it.seed = 0;
  DatasetManifest cue = write_coded(dir, {it}, {0.5f});
  auto enc = random_encoder(8);
  ProbeHead head;
  head.dim = enc.cfg.feat_dim();
  head.classes = kShapeClasses;
  head.w.assign(std::size_t(head.dim) * head.classes, 0.0f);
  head.b.assign(head.classes, 0.0f);
  head.mu.assign(head.dim, 0.0f);
  head.sigma.assign(head.dim, 1.0f);
  CHECK_THROWS_AS(shape_bias(enc, head, cue, 16), ContractError);
  fs::remove_all(dir);
}

TEST_CASE("robustness: identity perturbation equals the plain probe accuracy") {
  std::string dir = temp_dir("robust");
  make_dataset(dir, 32, 9);
  DatasetManifest m = read_manifest(dir, "train");
  auto enc = random_encoder(10);
  auto [res, head] = linear_probe(enc, m, 17);
  double ident = robustness_eval(enc, head, m, Perturbation::Identity, 17);
  CHECK(ident == res.accuracy);
  for (Perturbation p : {Perturbation::TextureSwap, Perturbation::Grayscale,
                         Perturbation::ColorNoise}) {
    double acc = robustness_eval(enc, head, m, p, 17);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("feature_drift: zero for identical encoders, positive otherwise") {
  std::string dir = temp_dir("drift");
  make_dataset(dir, 8, 11);
  DatasetManifest m = read_manifest(dir, "train");
  auto a = random_encoder(12);
  auto b = random_encoder(13);
  CHECK(feature_drift(a, a, m, 16) == 0.0);
  double d = feature_drift(a, b, m, 16);
  CHECK(d > 0.0);
  CHECK(std::isfinite(d));
  fs::remove_all(dir);
}

TEST_CASE("pretrain_teacher: saves a loadable encoder deterministically") {
  std::string data = temp_dir("teach_data");
  make_dataset(data, 32, 13);
  std::string out = temp_dir("teach_out");
  std::string p1 = (fs::path(out) / "t1.tpck").string();
  std::string p2 = (fs::path(out) / "t2.tpck").string();
  EncoderConfig ec = micro_encoder();
  double a1 = pretrain_teacher(data, p1, 2, 21, ec);
  double a2 = pretrain_teacher(data, p2, 2, 21, ec);
  CHECK(a1 == a2);
  CHECK(a1 >= 0.0);
  CHECK(a1 <= 1.0);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> b1{std::istreambuf_iterator<char>(f1), std::istreambuf_iterator<char>()};
  std::vector<char> b2{std::istreambuf_iterator<char>(f2), std::istreambuf_iterator<char>()};
  CHECK(b1 == b2);

  auto enc = load_encoder(p1, ec, "enc");
  DatasetManifest m = read_manifest(data, "train");
  auto [res, head] = linear_probe(enc, m, 1);
  CHECK(res.accuracy >= 0.0);
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("ablation: mean helper averages only non-failed rows") {
  AblationResult r;
  r.rows = {{"full", "probe_acc", 1, 0.5, false},
            {"full", "probe_acc", 2, 0.7, false},
            {"full", "probe_acc", 3, 0.0, true},
            {"full", "shape_bias", 1, 0.9, false}};
  CHECK(r.mean("full", "probe_acc") == doctest::Approx(0.6));
  CHECK(r.mean("full", "shape_bias") == doctest::Approx(0.9));
  CHECK(std::isnan(r.mean("no_dist", "probe_acc")));
}

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "tp/evalkit.hpp"

namespace fs = std::filesystem;

namespace tp {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  return idx;
}

// 75/25 split shared by probing and robustness so the held-out set agrees.
void probe_split(std::size_t n, std::uint64_t seed, std::vector<std::size_t>& train,
                 std::vector<std::size_t>& val) {
  Rng rng = Rng::stream(seed, 0x59117u);
  auto idx = shuffled_indices(n, rng);
  std::size_t ntr = (n * 3) / 4;
  train.assign(idx.begin(), idx.begin() + ntr);
  val.assign(idx.begin() + ntr, idx.end());
}

Image load_image(const DatasetManifest& m, const DatasetItem& it, int image_size) {
  Image img = read_png((fs::path(m.root) / (std::to_string(it.idx) + ".png")).string());
  if (img.w != image_size) img = resize_bilinear(img, image_size, image_size);
  return img;
}

}  // namespace

std::vector<float> pooled_features(const VitEncoder<float>& enc, const Image& img) {
  NoGradGuard ng;
  std::vector<float> pix(img.data.begin(), img.data.end());
  return enc.encode(pix).pooled.data();
}

int ProbeHead::predict(const std::vector<float>& pooled) const {
  contract(int(pooled.size()) == dim, "probe: feature dim mismatch");
  int best = 0;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < classes; ++k) {
    double s = b[k];
    for (int d = 0; d < dim; ++d)
      s += double((pooled[d] - mu[d]) / sigma[d]) * w[std::size_t(d) * classes + k];
    if (s > best_s) {
      best_s = s;
      best = k;
    }
  }
  return best;
}

VitEncoder<float> load_encoder(const std::string& ck_path, const EncoderConfig& ec,
                               const std::string& prefix) {
  Checkpoint ck = read_checkpoint(ck_path);
  Rng rng(0);
  VitEncoder<float> enc = VitEncoder<float>::init(ec, rng);
  ParamList<float> ps;
  enc.collect(ps, prefix);
  for (auto& [name, v] : ps) {
    const auto& [shape, data] = ck.get(name);
    contract(shape == v.shape(), "load_encoder: shape mismatch for " + name);
    v.data() = data;
  }
  return enc;
}

double pretrain_teacher(const std::string& data_root, const std::string& out_path,
                        int epochs, std::uint64_t seed, const EncoderConfig& ec) {
  DatasetManifest mani = read_manifest(data_root, "train");
  contract(!mani.items.empty(), "pretrain_teacher: empty dataset");

  std::vector<std::vector<float>> pixels(mani.items.size());
  std::vector<int> labels(mani.items.size());
  for (std::size_t i = 0; i < mani.items.size(); ++i) {
    Image img = load_image(mani, mani.items[i], ec.image_size);
    pixels[i].assign(img.data.begin(), img.data.end());
    labels[i] = mani.items[i].shape_class;
  }

  std::vector<std::size_t> tr, va;
  probe_split(mani.items.size(), seed, tr, va);

  Rng rng = Rng::stream(seed, 0x7EAC8u);
  VitEncoder<float> enc = VitEncoder<float>::init(ec, rng);
  Linear<float> head = Linear<float>::init(ec.feat_dim(), kShapeClasses, rng);
  ParamList<float> params;
  enc.collect(params, "enc");
  head.collect(params, "head");
  Adam opt;
  opt.lr = 1e-3;
  opt.init(params);

  const int batch = 8;
  for (int e = 0; e < epochs; ++e) {
    Rng srng = Rng::stream(seed, 0x7E50u, std::uint64_t(e));
    std::vector<std::size_t> order = tr;
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[srng.uniform_int(i + 1)]);
    for (std::size_t lo = 0; lo < order.size(); lo += batch) {
      std::size_t hi = std::min(lo + batch, order.size());
      std::vector<Var<float>> pooled;
      std::vector<int> y;
      for (std::size_t j = lo; j < hi; ++j) {
        pooled.push_back(enc.encode(pixels[order[j]]).pooled);
        y.push_back(labels[order[j]]);
      }
      Var<float> logits = head(concat_rows(pooled));
      Var<float> loss = softmax_cross_entropy(logits, y);
      backward(loss);
      opt.step(params);
    }
  }

  // held-out accuracy of the encoder we are about to freeze
  int correct = 0;
  {
    NoGradGuard ng;
    for (std::size_t i : va) {
      Var<float> logits = head(enc.encode(pixels[i]).pooled);
      const auto& v = logits.data();
      int best = int(std::max_element(v.begin(), v.end()) - v.begin());
      if (best == labels[i]) ++correct;
    }
  }
  double acc = va.empty() ? 0.0 : double(correct) / double(va.size());

  Checkpoint ck;
  ck.config_echo = "teacher";
  ParamList<float> enc_only;
  enc.collect(enc_only, "enc");
  for (const auto& [name, v] : enc_only) ck.put(name, v.shape(), v.data());
  write_checkpoint(out_path, ck);
  return acc;
}

std::pair<ProbeResult, ProbeHead> linear_probe(const VitEncoder<float>& enc,
                                               const DatasetManifest& data,
                                               std::uint64_t seed) {
  contract(!data.items.empty(), "linear_probe: empty dataset");
  const int D = enc.cfg.feat_dim(), K = kShapeClasses;

  std::vector<std::vector<float>> feats(data.items.size());
  std::vector<int> labels(data.items.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    feats[i] = pooled_features(enc, load_image(data, data.items[i], enc.cfg.image_size));
    labels[i] = data.items[i].shape_class;
  }

  std::vector<std::size_t> tr, va;
  probe_split(data.items.size(), seed, tr, va);

  {
    int first = labels[tr[0]];
    bool varied = false;
    for (std::size_t i : tr)
      if (labels[i] != first) varied = true;
    if (!varied) throw ConfigError("linear_probe: single-class training split");
  }

  ProbeHead head;
  head.dim = D;
  head.classes = K;
  head.mu.assign(D, 0.0f);
  head.sigma.assign(D, 0.0f);
  for (std::size_t i : tr)
    for (int d = 0; d < D; ++d) head.mu[d] += feats[i][d];
  for (int d = 0; d < D; ++d) head.mu[d] /= float(tr.size());
  for (std::size_t i : tr)
    for (int d = 0; d < D; ++d) {
      float c = feats[i][d] - head.mu[d];
      head.sigma[d] += c * c;
    }
  for (int d = 0; d < D; ++d)
    head.sigma[d] = std::max(std::sqrt(head.sigma[d] / float(tr.size())), 1e-6f);

  std::vector<float> xtr(tr.size() * D);
  std::vector<int> ytr(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    for (int d = 0; d < D; ++d)
      xtr[i * D + d] = (feats[tr[i]][d] - head.mu[d]) / head.sigma[d];
    ytr[i] = labels[tr[i]];
  }

  // fixed-budget full-batch training of the softmax head
  Var<float> X = Var<float>::constant({int(tr.size()), D}, std::move(xtr));
  Rng rng = Rng::stream(seed, 0x9F0BEu);
  Linear<float> lin = Linear<float>::init(D, K, rng);
  ParamList<float> params;
  lin.collect(params, "probe");
  Adam opt;
  opt.lr = 0.05;
  opt.init(params);
  for (int it = 0; it < 200; ++it) {
    Var<float> loss = softmax_cross_entropy(lin(X), ytr);
    backward(loss);
    opt.step(params);
  }
  head.w = lin.w.data();
  head.b = lin.b.data();

  ProbeResult res;
  res.seed = seed;
  res.train_n = int(tr.size());
  res.val_n = int(va.size());
  res.per_class.assign(K, 0.0);
  std::vector<int> class_n(K, 0);
  int correct = 0;
  for (std::size_t i : va) {
    int pred = head.predict(feats[i]);
    ++class_n[labels[i]];
    if (pred == labels[i]) {
      ++correct;
      res.per_class[labels[i]] += 1;
    }
  }
  for (int k = 0; k < K; ++k)
    res.per_class[k] = class_n[k] ? res.per_class[k] / class_n[k] : 0.0;
  res.accuracy = va.empty() ? 0.0 : double(correct) / double(va.size());
  return {res, head};
}

ShapeBiasResult shape_bias(const VitEncoder<float>& enc, const ProbeHead& head,
                           const DatasetManifest& cue_conflict, int image_size) {
  ShapeBiasResult r;
  for (const auto& it : cue_conflict.items) {
    contract(it.shape_class != it.texture_class, "shape_bias: item is not cue-conflict");
    int pred = head.predict(pooled_features(enc, load_image(cue_conflict, it, image_size)));
    if (pred == it.shape_class)
      ++r.shape_matches;
    else if (pred == it.texture_class)
      ++r.texture_matches;
    else
      ++r.other;
  }
  if (r.shape_matches + r.texture_matches > 0)
    r.bias = double(r.shape_matches) / double(r.shape_matches + r.texture_matches);
  return r;
}

double robustness_eval(const VitEncoder<float>& enc, const ProbeHead& head,
                       const DatasetManifest& data, Perturbation p,
                       std::uint64_t seed) {
  std::vector<std::size_t> tr, va;
  probe_split(data.items.size(), seed, tr, va);
  Camera cam = Camera::make_default(enc.cfg.image_size);
  int correct = 0;
  for (std::size_t i : va) {
    const DatasetItem& it = data.items[i];
    Image img;
    switch (p) {
      case Perturbation::Identity:
        img = load_image(data, it, enc.cfg.image_size);
        break;
      case Perturbation::TextureSwap: {
        Rng rng = Rng::stream(seed, 0x7E57u, std::uint64_t(it.idx));
        int swapped = (it.texture_class + 1 +
                       int(rng.uniform_int(kTextureClasses - 1))) % kTextureClasses;
        render_texture_swap(it, swapped, cam, enc.cfg.image_size, img);
        break;
      }
      case Perturbation::Grayscale:
        img = grayscale(load_image(data, it, enc.cfg.image_size));
        break;
      case Perturbation::ColorNoise: {
        img = load_image(data, it, enc.cfg.image_size);
        Rng rng = Rng::stream(seed, 0xC015Eu, std::uint64_t(it.idx));
        for (auto& v : img.data)
          v = std::clamp(v + 0.1f * float(rng.normal()), 0.0f, 1.0f);
        break;
      }
    }
    if (head.predict(pooled_features(enc, img)) == it.shape_class) ++correct;
  }
  return va.empty() ? 0.0 : double(correct) / double(va.size());
}

double feature_drift(const VitEncoder<float>& student, const VitEncoder<float>& teacher,
                     const DatasetManifest& data, int image_size) {
  NoGradGuard ng;
  double acc = 0;
  for (const auto& it : data.items) {
    Image img = load_image(data, it, image_size);
    std::vector<float> pix(img.data.begin(), img.data.end());
    FeatureMap<float> fs_ = student.encode(pix);
    FeatureMap<float> ft = teacher.encode(pix);
    const auto& a = fs_.grid.data();
    const auto& b = ft.grid.data();
    double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      double d = double(a[j]) - double(b[j]);
      s += d * d;
    }
    acc += s / double(a.size());
  }
  return data.items.empty() ? 0.0 : acc / double(data.items.size());
}

double AblationResult::mean(const std::string& variant, const std::string& metric) const {
  double s = 0;
  int n = 0;
  for (const auto& r : rows)
    if (r.variant == variant && r.metric == metric && !r.failed) {
      s += r.value;
      ++n;
    }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

AblationResult ablate(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  AblationResult result;

  struct Variant {
    std::string name;
    void (*tweak)(TrainConfig&);
  };
  const std::vector<Variant> variants = {
      {"full", [](TrainConfig&) {}},
      {"no_dist", [](TrainConfig& c) { c.no_dist = true; }},
      {"no_triplane", [](TrainConfig& c) { c.no_triplane = true; }},
      {"from_scratch",
       [](TrainConfig& c) {
         c.from_scratch = true;
         c.teacher.clear();
       }},
      {"data_1_16", [](TrainConfig& c) { c.data_fraction = 1.0 / 16.0; }},
      {"data_1_4", [](TrainConfig& c) { c.data_fraction = 0.25; }},
  };

  DatasetManifest train_m = read_manifest(base.data_root, "train");
  DatasetManifest cue_m = read_manifest(base.data_root, "cueconflict");
  EncoderConfig ec = base.encoder_config();
  VitEncoder<float> teacher = load_encoder(base.teacher, ec, "enc");

  auto push = [&](const std::string& variant, const std::string& metric,
                  std::uint64_t seed, double value, bool failed = false) {
    result.rows.push_back({variant, metric, seed, value, failed});
  };

  for (std::uint64_t seed : seeds) {
    // frozen-teacher baseline under the same probe seed
    auto [tres, thead] = linear_probe(teacher, train_m, seed);
    push("teacher", "probe_acc", seed, tres.accuracy);
    push("teacher", "texture_swap_acc", seed,
         robustness_eval(teacher, thead, train_m, Perturbation::TextureSwap, seed));
    auto tbias = shape_bias(teacher, thead, cue_m, ec.image_size);
    push("teacher", "shape_bias", seed, tbias.bias.value_or(0.0));
    push("teacher", "feature_drift", seed, 0.0);

    for (const auto& variant : variants) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      variant.tweak(cfg);
      cfg.out_dir = (fs::path(out_dir) / (variant.name + "_s" + std::to_string(seed))).string();
      try {
        Trainer tr = Trainer::create(cfg);
        tr.train();
        auto [pres, phead] = linear_probe(tr.model.enc, train_m, seed);
        push(variant.name, "probe_acc", seed, pres.accuracy);
        push(variant.name, "texture_swap_acc", seed,
             robustness_eval(tr.model.enc, phead, train_m, Perturbation::TextureSwap, seed));
        auto bias = shape_bias(tr.model.enc, phead, cue_m, ec.image_size);
        push(variant.name, "shape_bias", seed, bias.bias.value_or(0.0));
        push(variant.name, "feature_drift", seed,
             feature_drift(tr.model.enc, teacher, train_m, ec.image_size));
      } catch (const std::exception& e) {
        // record the failure and keep the grid going
        for (const char* metric :
             {"probe_acc", "texture_swap_acc", "shape_bias", "feature_drift"})
          push(variant.name, metric, seed,
               std::numeric_limits<double>::quiet_NaN(), true);
        std::ofstream log(fs::path(out_dir) / (variant.name + "_s" +
                                               std::to_string(seed) + ".error"));
        log << e.what() << "\n";
      }
    }
  }

  result.csv_path = (fs::path(out_dir) / "ablation.csv").string();
  {
    std::ofstream csv(result.csv_path);
    csv << "variant,metric,seed,value\n";
    for (const auto& r : result.rows) {
      csv << r.variant << ',' << r.metric << ',' << r.seed << ',';
      if (r.failed)
        csv << "failed";
      else
        csv << r.value;
      csv << '\n';
    }
  }

  result.summary_path = (fs::path(out_dir) / "summary.txt").string();
  {
    std::ofstream sum(result.summary_path);
    sum << "variant            probe_acc  texture_swap  shape_bias  drift\n";
    std::vector<std::string> names = {"teacher"};
    for (const auto& v : variants) names.push_back(v.name);
    sum.setf(std::ios::fixed);
    sum.precision(4);
    for (const auto& name : names) {
      sum << name;
      for (std::size_t i = name.size(); i < 19; ++i) sum << ' ';
      sum << result.mean(name, "probe_acc") << "     " << result.mean(name, "texture_swap_acc")
          << "        " << result.mean(name, "shape_bias") << "      "
          << result.mean(name, "feature_drift") << "\n";
    }
  }
  return result;
}

}  // namespace tp

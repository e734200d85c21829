#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "tp/trainer.hpp"

namespace fs = std::filesystem;

namespace tp {

// ------------------------------------------------------------------ model

Model Model::init(const EncoderConfig& ec, const TriplaneConfig& tc, int mlp_hidden,
                  bool no_triplane, int render_res, Rng& rng) {
  Model m;
  m.enc = VitEncoder<float>::init(ec, rng);
  m.use_conv = no_triplane;
  if (no_triplane) {
    m.conv = ConvDecoder<float>::init(ec.grid(), render_res, tc.C, ec.feat_dim(), rng);
  } else {
    m.dec = TriplaneDecoder<float>::init(tc, rng);
    m.mlp = RadianceMlp<float>::init(tc.C, mlp_hidden, rng);
  }
  return m;
}

ParamList<float> Model::params() const {
  ParamList<float> out;
  enc.collect(out, "enc");
  if (use_conv) {
    conv.collect(out, "conv");
  } else {
    dec.collect(out, "dec");
    mlp.collect(out, "mlp");
  }
  return out;
}

void Model::freeze() {
  for (auto& [name, v] : params()) v.node()->requires_grad = false;
}

void Model::store(Checkpoint& ck, const std::string& prefix) const {
  for (const auto& [name, v] : params())
    ck.put(prefix + "." + name, v.shape(), v.data());
}

void Model::load(const Checkpoint& ck, const std::string& prefix) {
  for (auto& [name, v] : params()) {
    const auto& [shape, data] = ck.get(prefix + "." + name);
    contract(shape == v.shape(), "checkpoint: shape mismatch for " + name);
    v.data() = data;
  }
}

void Model::copy_from(const Model& other) {
  auto dst = params();
  auto src = other.params();
  contract(dst.size() == src.size(), "copy_from: model structure mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    contract(dst[i].first == src[i].first && dst[i].second.shape() == src[i].second.shape(),
             "copy_from: parameter mismatch at " + dst[i].first);
    dst[i].second.data() = src[i].second.data();
  }
}

std::string param_hash(const ParamList<float>& params) {
  std::vector<float> all;
  for (const auto& [name, v] : params)
    all.insert(all.end(), v.data().begin(), v.data().end());
  return sha256_hex(all.data(), all.size() * sizeof(float));
}

// ------------------------------------------------------------------- Adam

void Adam::init(const ParamList<float>& params) {
  m.assign(params.size(), {});
  v.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i].assign(params[i].second.size(), 0.0f);
    v[i].assign(params[i].second.size(), 0.0f);
  }
  t = 0;
}

void Adam::step(const ParamList<float>& params) {
  contract(params.size() == m.size(), "adam: parameter count changed");
  ++t;
  double bc1 = 1.0 - std::pow(beta1, double(t));
  double bc2 = 1.0 - std::pow(beta2, double(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& node = *params[i].second.node();
    contract(node.grad.size() == m[i].size(), "adam: missing gradient for " + params[i].first);
    auto& val = params[i].second.node()->val;
    for (std::size_t j = 0; j < val.size(); ++j) {
      double g = node.grad[j];
      if (!std::isfinite(g))
        throw DiagnosticError("adam: non-finite gradient in " + params[i].first);
      double mm = beta1 * m[i][j] + (1 - beta1) * g;
      double vv = beta2 * v[i][j] + (1 - beta2) * g * g;
      m[i][j] = float(mm);
      v[i][j] = float(vv);
      val[j] -= float(lr * (mm / bc1) / (std::sqrt(vv / bc2) + eps));
    }
  }
}

// ------------------------------------------------------------ data access

void augment(Image& image, Image& depth, Rng& rng) {
  contract(image.w == depth.w && image.h == depth.h, "augment: image/depth size mismatch");
  double s = rng.uniform(0.8, 1.0);
  int cw = std::max(1, int(std::lround(s * image.w)));
  int ch = std::max(1, int(std::lround(s * image.h)));
  int x0 = int(rng.uniform_int(std::uint64_t(image.w - cw + 1)));
  int y0 = int(rng.uniform_int(std::uint64_t(image.h - ch + 1)));
  int w = image.w, h = image.h;
  image = resize_bilinear(crop(image, x0, y0, cw, ch), w, h);
  depth = resize_bilinear(crop(depth, x0, y0, cw, ch), w, h);
  if (rng.uniform() < 0.5) {
    image = hflip(image);
    depth = hflip(depth);
  }
}

void load_item(const DatasetManifest& m, const DatasetItem& it, int image_size,
               Image& image, Image& depth) {
  std::string base = (fs::path(m.root) / std::to_string(it.idx)).string();
  image = read_png(base + ".png");
  depth = read_tpdm(base + ".tpdm");
  if (image.w != image_size) image = resize_bilinear(image, image_size, image_size);
  if (depth.w != image_size) depth = resize_bilinear(depth, image_size, image_size);
}

// ------------------------------------------------------------------- loop

namespace {

Var<float> image_var(const Image& img, int res) {
  Image r = img.w == res ? img : resize_bilinear(img, res, res);
  std::vector<float> v(r.data.begin(), r.data.end());
  return Var<float>::constant({res * res, r.c}, std::move(v));
}

Var<float> batch_mean(std::vector<Var<float>> xs) {
  Var<float> acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, 1.0f / float(xs.size()));
}

}  // namespace

Trainer Trainer::create(const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (cfg.no_dist || cfg.from_scratch) cfg.lambda_dist = 0;

  Trainer tr;
  tr.cfg = cfg;
  Rng rng = Rng::stream(cfg.seed, 0x10D31u);
  tr.model = Model::init(cfg.encoder_config(), cfg.triplane_config(), cfg.mlp_hidden,
                         cfg.no_triplane, cfg.render_res, rng);
  if (!cfg.from_scratch) {
    if (cfg.teacher.empty() && cfg.lambda_dist > 0)
      throw ConfigError("trainer: teacher checkpoint required when lambda_dist > 0");
    if (!cfg.teacher.empty()) {
      Checkpoint tck = read_checkpoint(cfg.teacher);
      Rng trng = Rng::stream(cfg.seed, 0x7EAC4u);
      Model teacher = Model::init(cfg.encoder_config(), cfg.triplane_config(),
                                  cfg.mlp_hidden, cfg.no_triplane, cfg.render_res, trng);
      // teacher checkpoints carry the encoder only
      ParamList<float> tp;
      teacher.enc.collect(tp, "enc");
      for (auto& [name, v] : tp) {
        const auto& [shape, data] = tck.get(name);
        contract(shape == v.shape(), "teacher: shape mismatch for " + name);
        v.data() = data;
      }
      // student starts from the teacher weights
      ParamList<float> sp;
      tr.model.enc.collect(sp, "enc");
      for (std::size_t i = 0; i < sp.size(); ++i) sp[i].second.data() = tp[i].second.data();
      teacher.freeze();
      tr.teacher_hash = param_hash(tp);
      tr.teacher = std::move(teacher);
    }
  }
  tr.opt.lr = cfg.lr;
  tr.opt.init(tr.model.params());
  return tr;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ck;
  ck.step = step;
  ck.config_echo = echo_config(cfg);
  model.store(ck, "model");
  auto ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ck.put("opt.m." + ps[i].first, ps[i].second.shape(), opt.m[i]);
    ck.put("opt.v." + ps[i].first, ps[i].second.shape(), opt.v[i]);
  }
  return ck;
}

void Trainer::load_from(const Checkpoint& ck) {
  step = ck.step;
  opt.t = ck.step;
  model.load(ck, "model");
  auto ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    opt.m[i] = ck.get("opt.m." + ps[i].first).second;
    opt.v[i] = ck.get("opt.v." + ps[i].first).second;
  }
}

void Trainer::save_checkpoint(const std::string& path) const {
  write_checkpoint(path, to_checkpoint());
}

Trainer Trainer::resume(const TrainConfig& cfg) {
  Trainer tr = create(cfg);
  std::string path = (fs::path(cfg.out_dir) / "last.tpck").string();
  tr.load_from(read_checkpoint(path));
  return tr;
}

StepMetrics Trainer::train_step(const std::vector<DatasetItem>& batch, int epoch) {
  contract(!batch.empty(), "train_step: empty batch");
  auto t0 = std::chrono::steady_clock::now();
  DatasetManifest mani = read_manifest(cfg.data_root, "train");

  std::vector<Var<float>> rgbs, depths, dists, norms;
  Camera cam = Camera::make_default(cfg.image_size);
  for (const auto& it : batch) {
    Image img, dep;
    load_item(mani, it, cfg.image_size, img, dep);
    Rng arng = Rng::stream(cfg.seed, 0xA406u, step, std::uint64_t(it.idx));
    augment(img, dep, arng);

    std::vector<float> pix(img.data.begin(), img.data.end());
    FeatureMap<float> h = model.enc.encode(pix);

    Var<float> target_img = image_var(img, cfg.render_res);
    Var<float> target_dep = image_var(dep, cfg.render_res);

    if (model.use_conv) {
      auto [rec_img, rec_dep] = model.conv.decode(h, float(cam.near_t), float(cam.far_t));
      rgbs.push_back(rgb_loss(target_img, rec_img));
      depths.push_back(depth_loss(target_dep, rec_dep));
      norms.push_back(Var<float>::constant({1}, {0.0f}));
    } else {
      Triplane<float> tp = model.dec.decode(h);
      RenderSpec spec;
      spec.resolution = cfg.render_res;
      spec.coarse_samples = cfg.coarse_samples;
      spec.fine_samples = cfg.fine_samples;
      spec.seed = Rng::stream(cfg.seed, 0x3E11Du, step, std::uint64_t(it.idx)).next_u64();
      auto out = render(tp, model.mlp, cam, spec);
      rgbs.push_back(rgb_loss(target_img, out.image));
      depths.push_back(depth_loss(target_dep, out.depth));
      norms.push_back(density_norm_loss(out.sigma));
    }

    if (cfg.lambda_dist > 0 && teacher) {
      FeatureMap<float> th;
      {
        NoGradGuard ng;
        th = teacher->enc.encode(pix);
      }
      dists.push_back(distillation_loss(h.grid, th.grid));
    } else {
      dists.push_back(Var<float>::constant({1}, {0.0f}));
    }
  }

  auto report = total_loss(batch_mean(rgbs), batch_mean(depths), batch_mean(dists),
                           batch_mean(norms), cfg.loss_weights());
  if (!std::isfinite(report.total.item()))
    throw DiagnosticError("train_step: non-finite loss at step " + std::to_string(step));
  backward(report.total);
  opt.step(model.params());
  ++step;

  StepMetrics sm;
  sm.step = step;
  sm.epoch = epoch;
  sm.rgb = report.rgb.item();
  sm.depth = report.depth.item();
  sm.dist = report.dist.item();
  sm.norm = report.norm.item();
  sm.total = report.total.item();
  sm.wall_ms = std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t0).count();
  history.push_back(sm);
  return sm;
}

void Trainer::train() {
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream cf(fs::path(cfg.out_dir) / "config.txt");
    cf << echo_config(cfg);
  }
  DatasetManifest mani = read_manifest(cfg.data_root, "train");
  contract(!mani.items.empty(), "train: empty dataset");

  // seeded data-fraction subset
  std::vector<DatasetItem> pool = mani.items;
  if (cfg.data_fraction < 1.0) {
    Rng frng = Rng::stream(cfg.seed, 0xD47AFu);
    for (std::size_t i = pool.size() - 1; i > 0; --i)
      std::swap(pool[i], pool[frng.uniform_int(i + 1)]);
    std::size_t keep = std::size_t(cfg.data_fraction * double(mani.items.size()));
    contract(keep >= 1, "train: data_fraction leaves no items");
    pool.resize(keep);
  }

  std::size_t spe = (pool.size() + cfg.batch - 1) / std::size_t(cfg.batch);
  std::uint64_t total_steps = std::uint64_t(spe) * std::uint64_t(cfg.epochs);
  if (cfg.max_steps >= 0) total_steps = std::min<std::uint64_t>(total_steps, cfg.max_steps);

  std::string csv_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  std::ofstream csv;
  if (step == 0) {
    csv.open(csv_path);
    csv << "step,epoch,rgb,depth,dist,norm,total,wall_ms\n";
  } else {
    csv.open(csv_path, std::ios::app);
  }

  while (step < total_steps) {
    int epoch = int(step / spe);
    std::size_t bidx = std::size_t(step % spe);
    // per-epoch shuffle re-derived from the seed, so resume needs no state
    std::vector<DatasetItem> order = pool;
    Rng srng = Rng::stream(cfg.seed, 0x50FFu, std::uint64_t(epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[srng.uniform_int(i + 1)]);
    std::size_t lo = bidx * cfg.batch;
    std::size_t hi = std::min(lo + cfg.batch, order.size());
    std::vector<DatasetItem> batch(order.begin() + lo, order.begin() + hi);

    StepMetrics sm = train_step(batch, epoch);
    csv << sm.step << ',' << sm.epoch << ',' << sm.rgb << ',' << sm.depth << ','
        << sm.dist << ',' << sm.norm << ',' << sm.total << ',' << sm.wall_ms << '\n';
    csv.flush();
    if (cfg.checkpoint_every > 0 && step % std::uint64_t(cfg.checkpoint_every) == 0)
      save_checkpoint((fs::path(cfg.out_dir) / "last.tpck").string());
  }
  save_checkpoint((fs::path(cfg.out_dir) / "last.tpck").string());
  save_checkpoint((fs::path(cfg.out_dir) / "final.tpck").string());
}

}  // namespace tp

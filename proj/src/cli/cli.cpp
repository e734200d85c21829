#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tp/cli.hpp"
#include "tp/evalkit.hpp"
#include "tp/gradcheck.hpp"
#include "tp/report.hpp"

namespace fs = std::filesystem;

namespace tp {

namespace {

// ------------------------------------------------------------- grad-check

struct GradRow {
  std::string name;
  double err;
  double threshold;
};

using VarD = Var<double>;

std::vector<double> randv(std::size_t n, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<GradRow> gradient_suite() {
  std::vector<GradRow> rows;
  Rng rng(2024);
  auto prim = [&](const std::string& name, auto f, std::vector<int> shape,
                  double lo = -1, double hi = 1) {
    double err = check_gradients([&](VarD& x) { return f(x); }, shape,
                                 randv(shape_numel(shape), rng, lo, hi), 1e-6);
    rows.push_back({name, err, 1e-5});
  };

  prim("add", [](VarD& x) { return sum_all(add(x, x)); }, {3, 4});
  prim("sub", [](VarD& x) { return sum_all(mul(sub(x, scale(x, 0.5)), x)); }, {3, 4});
  prim("mul", [](VarD& x) { return mean_all(mul(x, x)); }, {3, 4});
  prim("scale", [](VarD& x) { return sum_all(scale(x, -1.7)); }, {5});
  prim("add_scalar", [](VarD& x) { return mean_all(mul(add_scalar(x, 2.0), x)); }, {5});
  prim("neg", [](VarD& x) { return sum_all(mul(neg(x), x)); }, {5});
  prim("exp", [](VarD& x) { return mean_all(exp_(x)); }, {4, 4});
  prim("sigmoid", [](VarD& x) { return mean_all(sigmoid(x)); }, {4, 4}, -3, 3);
  prim("softplus", [](VarD& x) { return mean_all(softplus(x)); }, {4, 4}, -3, 3);
  prim("relu", [](VarD& x) { return mean_all(relu(x)); }, {17});
  prim("gelu", [](VarD& x) { return mean_all(gelu(x)); }, {4, 4}, -2.5, 2.5);
  prim("softmax_rows", [](VarD& x) { return mean_all(mul(softmax_rows(x), x)); }, {3, 5});
  prim("sum_all", [](VarD& x) { return sum_all(x); }, {7});
  prim("mean_all", [](VarD& x) { return mean_all(mul(x, x)); }, {7});
  prim("reshape", [](VarD& x) { return mean_all(mul(reshape(x, {4, 3}), reshape(x, {4, 3}))); },
       {3, 4});
  prim("rows_cols",
       [](VarD& x) { return mean_all(mul(tp::rows(x, 1, 3), cols(tp::rows(x, 0, 2), 0, 4))); },
       {4, 4});
  prim("tile_rows", [](VarD& x) { return mean_all(mul(tile_rows(x, 3), tile_rows(x, 3))); },
       {1, 5});

  {
    Rng r2(7);
    auto a = VarD::param({3, 4}, randv(12, r2));
    auto b = VarD::param({4, 5}, randv(20, r2));
    double err = check_gradients_params(
        [&] { return mean_all(mul(matmul(a, b), matmul(a, b))); }, {a, b}, 1e-6);
    auto at = VarD::param({4, 3}, randv(12, r2));
    auto bt = VarD::param({5, 4}, randv(20, r2));
    err = std::max(err, check_gradients_params(
        [&] { return sum_all(matmul(at, b, true, false)); }, {at, b}, 1e-6));
    err = std::max(err, check_gradients_params(
        [&] { return sum_all(matmul(a, bt, false, true)); }, {a, bt}, 1e-6));
    err = std::max(err, check_gradients_params(
        [&] { return sum_all(matmul(at, bt, true, true)); }, {at, bt}, 1e-6));
    rows.push_back({"matmul", err, 1e-5});

    auto x = VarD::param({3, 4}, randv(12, r2));
    auto bias = VarD::param({4}, randv(4, r2));
    rows.push_back({"add_rowvec",
                    check_gradients_params(
                        [&] { return mean_all(sigmoid(add_rowvec(x, bias))); }, {x, bias}, 1e-6),
                    1e-5});
    auto g = VarD::param({4}, randv(4, r2, 0.5, 1.5));
    rows.push_back({"layernorm",
                    check_gradients_params(
                        [&] {
                          return mean_all(mul(layernorm(x, g, bias), layernorm(x, g, bias)));
                        },
                        {x, g, bias}, 1e-6),
                    1e-5});
    auto y = VarD::param({3, 4}, randv(12, r2));
    rows.push_back({"mse_loss",
                    check_gradients_params([&] { return mse_loss(x, y); }, {x, y}, 1e-6), 1e-5});
    rows.push_back({"mae_loss",
                    check_gradients_params([&] { return mae_loss(x, y); }, {x, y}, 1e-6), 1e-5});
    std::vector<int> labels = {2, 0, 3};
    rows.push_back({"softmax_cross_entropy",
                    check_gradients_params(
                        [&] { return softmax_cross_entropy(x, labels); }, {x}, 1e-6),
                    1e-5});
    std::vector<VarD> cats = {x, y};
    rows.push_back({"concat",
                    check_gradients_params(
                        [&] {
                          return mean_all(mul(concat_cols(cats), concat_cols(cats)));
                        },
                        {x, y}, 1e-6),
                    1e-5});
  }

  {
    Rng r3(11);
    auto img = VarD::param({1, 4, 4, 3}, randv(48, r3));
    auto w = VarD::param({2, 27}, randv(54, r3, -0.5, 0.5));
    auto b = VarD::param({2}, randv(2, r3));
    rows.push_back({"conv3x3",
                    check_gradients_params(
                        [&] { return mean_all(mul(conv3x3(img, w, b), conv3x3(img, w, b))); },
                        {img, w, b}, 1e-6),
                    1e-5});
    rows.push_back({"upsample2x",
                    check_gradients_params(
                        [&] { return mean_all(mul(upsample2x(img), upsample2x(img))); }, {img},
                        1e-6),
                    1e-5});
    auto plane = VarD::param({6, 6, 4}, randv(144, r3));
    auto coords = VarD::param({5, 2}, randv(10, r3, -0.8, 0.8));
    rows.push_back({"bilinear_sample",
                    check_gradients_params(
                        [&] {
                          return mean_all(
                              mul(bilinear_sample(plane, coords), bilinear_sample(plane, coords)));
                        },
                        {plane, coords}, 1e-6),
                    1e-5});
  }

  {
    // radiance MLP through triplane features
    Rng r4(17);
    TriplaneConfig tc;
    tc.r = 4; tc.R = 8; tc.C = 4; tc.emb_dim = 8; tc.in_dim = 16;
    Triplane<double> tp;
    tp.R = tc.R; tp.C = tc.C;
    for (int p = 0; p < 3; ++p)
      tp.planes[p] = VarD::param({tc.R, tc.R, tc.C}, randv(tc.R * tc.R * tc.C, r4));
    auto mlp = RadianceMlp<double>::init(tc.C, 8, r4);
    std::vector<double> pts = randv(9, r4, -0.8, 0.8);
    ParamList<double> pl;
    mlp.collect(pl, "mlp");
    std::vector<VarD> ps;
    for (auto& [k, v] : pl) ps.push_back(v);
    for (int p = 0; p < 3; ++p) ps.push_back(tp.planes[p]);
    rows.push_back({"radiance_mlp",
                    check_gradients_params(
                        [&] {
                          auto fs = radiance_field(tp, pts, mlp);
                          return add(mean_all(fs.sigma), mean_all(mul(fs.rgb, fs.rgb)));
                        },
                        ps, 1e-5, 6, 42),
                    1e-5});

    // composite
    Rng r5(19);
    auto sigma = VarD::param({2, 4}, randv(8, r5, 0.2, 2.0));
    auto rgb = VarD::param({8, 3}, randv(24, r5, 0.0, 1.0));
    std::vector<double> t(8);
    for (int r = 0; r < 2; ++r) {
      Rng rr = Rng::stream(3, 0, std::uint64_t(r));
      auto tr = stratified_samples<double>(4, 1.7, 3.7, rr);
      std::copy(tr.begin(), tr.end(), t.begin() + r * 4);
    }
    rows.push_back({"composite",
                    check_gradients_params(
                        [&] {
                          auto out = composite(sigma, rgb, t, 3.7);
                          return add(mean_all(mul(out.color, out.color)),
                                     scale(mean_all(out.depth), 0.3));
                        },
                        {sigma, rgb}, 1e-6),
                    1e-5});

    // end-to-end 4x4 render to loss
    Rng r6(23);
    Triplane<double> tp2;
    tp2.R = 8; tp2.C = 4;
    for (int p = 0; p < 3; ++p)
      tp2.planes[p] = VarD::param({8, 8, 4}, randv(8 * 8 * 4, r6, -0.5, 0.5));
    auto mlp2 = RadianceMlp<double>::init(4, 8, r6);
    for (auto& v : mlp2.l2.b.data()) v = 0.3;
    RenderSpec spec;
    spec.resolution = 4;
    spec.coarse_samples = 3;
    spec.fine_samples = 3;
    spec.seed = 5;
    Camera cam = Camera::make_default(4);
    std::vector<VarD> planes(tp2.planes.begin(), tp2.planes.end());
    rows.push_back({"render_4x4",
                    check_gradients_params(
                        [&] {
                          auto out = render(tp2, mlp2, cam, spec);
                          auto dc = add_scalar(out.depth, -2.7);
                          return add(mean_all(mul(out.image, out.image)),
                                     mean_all(mul(dc, dc)));
                        },
                        planes, 1e-4, 8, 77),
                    1e-4});
  }

  {
    // the four losses plus the weighted total
    Rng r7(29);
    auto img = VarD::param({12}, randv(12, r7, 0, 1));
    auto dep = VarD::param({4}, randv(4, r7, 1.7, 3.7));
    auto feat = VarD::param({8}, randv(8, r7));
    auto sig = VarD::param({6}, randv(6, r7, 0, 2));
    auto img_t = VarD::constant({12}, randv(12, r7, 0, 1));
    auto dep_t = VarD::constant({4}, randv(4, r7, 1.7, 3.7));
    auto feat_t = VarD::constant({8}, randv(8, r7));
    rows.push_back({"loss_rgb",
                    check_gradients_params([&] { return rgb_loss(img_t, img); }, {img}, 1e-6),
                    1e-5});
    rows.push_back({"loss_depth",
                    check_gradients_params([&] { return depth_loss(dep_t, dep); }, {dep}, 1e-6),
                    1e-5});
    rows.push_back({"loss_dist",
                    check_gradients_params(
                        [&] { return distillation_loss(feat, feat_t); }, {feat}, 1e-6),
                    1e-5});
    rows.push_back({"loss_norm",
                    check_gradients_params([&] { return density_norm_loss(sig); }, {sig}, 1e-6),
                    1e-5});
    LossWeights<double> w;
    rows.push_back({"loss_total",
                    check_gradients_params(
                        [&] {
                          return total_loss(rgb_loss(img_t, img), depth_loss(dep_t, dep),
                                            distillation_loss(feat, feat_t),
                                            density_norm_loss(sig), w)
                              .total;
                        },
                        {img, dep, feat, sig}, 1e-6),
                    1e-5});
  }
  return rows;
}

// ------------------------------------------------------------ subcommands

int cmd_gen_data(const std::string& out, int n, int cue_n, std::uint64_t seed) {
  make_dataset(out, n, seed);
  if (cue_n > 0) make_cue_conflict(out, cue_n, seed);
  std::printf("wrote %d training scenes", n);
  if (cue_n > 0) std::printf(" and %d cue-conflict scenes", cue_n);
  std::printf(" under %s\n", out.c_str());
  return 0;
}

int cmd_pretrain_teacher(const std::string& data, const std::string& out, int epochs,
                         std::uint64_t seed) {
  EncoderConfig ec;  // desk defaults
  double acc = pretrain_teacher(data, out, epochs, seed, ec);
  std::printf("teacher saved to %s (held-out accuracy %.4f)\n", out.c_str(), acc);
  if (acc <= 1.0 / kShapeClasses) {
    std::fprintf(stderr, "teacher accuracy is not above chance (%.4f)\n", acc);
    return 1;
  }
  return 0;
}

TrainConfig config_with_overrides(const std::string& config_path,
                                  const std::vector<std::string>& sets) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              bool resume) {
  TrainConfig cfg = config_with_overrides(config_path, sets);
  Trainer tr = resume ? Trainer::resume(cfg) : Trainer::create(cfg);
  tr.train();
  std::printf("trained to step %llu; outputs in %s\n",
              (unsigned long long)tr.step, cfg.out_dir.c_str());
  return 0;
}

VitEncoder<float> encoder_from_checkpoint(const std::string& path, EncoderConfig& ec) {
  Checkpoint ck = read_checkpoint(path);
  // trained-run checkpoints echo their full config; teacher checkpoints
  // carry only a tag and keep the default encoder settings
  try {
    ec = parse_config(ck.config_echo).encoder_config();
  } catch (const ConfigError&) {
  }
  // trained-run checkpoints hold the encoder under model.enc; teacher
  // checkpoints hold it at the top level
  std::string prefix = ck.has("model.enc.cls") ? "model.enc" : "enc";
  return load_encoder(path, ec, prefix);
}

int cmd_eval(const std::string& ck_path, const std::string& data,
             const std::string& teacher_path, std::uint64_t seed) {
  EncoderConfig ec;
  VitEncoder<float> enc = encoder_from_checkpoint(ck_path, ec);
  DatasetManifest train_m = read_manifest(data, "train");
  auto [probe, head] = linear_probe(enc, train_m, seed);
  std::printf("probe_acc %.4f (train %d / val %d)\n", probe.accuracy, probe.train_n,
              probe.val_n);
  for (auto [name, p] : {std::pair<const char*, Perturbation>{"identity", Perturbation::Identity},
                         {"texture_swap", Perturbation::TextureSwap},
                         {"grayscale", Perturbation::Grayscale},
                         {"color_noise", Perturbation::ColorNoise}})
    std::printf("robustness(%s) %.4f\n", name,
                robustness_eval(enc, head, train_m, p, seed));
  try {
    DatasetManifest cue = read_manifest(data, "cueconflict");
    auto bias = shape_bias(enc, head, cue, ec.image_size);
    if (bias.bias)
      std::printf("shape_bias %.4f (shape %d / texture %d / other %d)\n", *bias.bias,
                  bias.shape_matches, bias.texture_matches, bias.other);
    else
      std::printf("shape_bias undefined (no shape or texture matches)\n");
  } catch (const IoError&) {
    std::printf("shape_bias skipped (no cue-conflict set under %s)\n", data.c_str());
  }
  if (!teacher_path.empty()) {
    VitEncoder<float> teacher = load_encoder(teacher_path, ec, "enc");
    std::printf("feature_drift %.6f\n", feature_drift(enc, teacher, train_m, ec.image_size));
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& sets,
               const std::vector<std::uint64_t>& seeds, const std::string& out) {
  TrainConfig cfg = config_with_overrides(config_path, sets);
  AblationResult res = ablate(cfg, seeds, out);
  std::ifstream sum(res.summary_path);
  std::cout << sum.rdbuf();
  std::printf("grid written to %s\n", res.csv_path.c_str());
  return 0;
}

int cmd_render(const std::string& ck_path, const std::string& data, int idx,
               const std::string& out_prefix, std::uint64_t seed) {
  Checkpoint ck = read_checkpoint(ck_path);
  TrainConfig cfg = parse_config(ck.config_echo);
  if (cfg.no_triplane) throw ConfigError("render: checkpoint was trained without a triplane");
  Rng rng = Rng::stream(cfg.seed, 0x10D31u);
  Model model = Model::init(cfg.encoder_config(), cfg.triplane_config(), cfg.mlp_hidden,
                            cfg.no_triplane, cfg.render_res, rng);
  model.load(ck, "model");

  DatasetManifest mani = read_manifest(data, "train");
  const DatasetItem* item = nullptr;
  for (const auto& it : mani.items)
    if (it.idx == idx) item = &it;
  if (!item) throw ConfigError("render: item " + std::to_string(idx) + " not in manifest");

  Image img, dep;
  load_item(mani, *item, cfg.image_size, img, dep);
  NoGradGuard ng;
  std::vector<float> pix(img.data.begin(), img.data.end());
  FeatureMap<float> h = model.enc.encode(pix);
  Triplane<float> tp = model.dec.decode(h);
  RenderSpec spec;
  spec.resolution = cfg.render_res;
  spec.coarse_samples = cfg.coarse_samples;
  spec.fine_samples = cfg.fine_samples;
  spec.seed = seed;
  Camera cam = Camera::make_default(cfg.image_size);
  auto out = render(tp, model.mlp, cam, spec);

  Image rec(cfg.render_res, cfg.render_res, 3);
  rec.data.assign(out.image.data().begin(), out.image.data().end());
  write_png(out_prefix + "_rgb.png", rec);
  Image dmap(cfg.render_res, cfg.render_res, 1);
  for (std::size_t i = 0; i < dmap.data.size(); ++i)
    dmap.data[i] = float((out.depth.data()[i] - cam.near_t) / (cam.far_t - cam.near_t));
  write_png(out_prefix + "_depth.png", dmap);
  write_tpdm(out_prefix + "_depth.tpdm", dmap);
  std::printf("wrote %s_rgb.png and %s_depth.png\n", out_prefix.c_str(), out_prefix.c_str());
  return 0;
}

int cmd_grad_check() {
  auto rows = gradient_suite();
  bool ok = true;
  for (const auto& r : rows) {
    bool pass = r.err < r.threshold;
    ok = ok && pass;
    std::printf("%-24s max_rel_err %.3e  (threshold %.0e)  %s\n", r.name.c_str(), r.err,
                r.threshold, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"triplane 3D-prior fine-tuning pipeline"};
  app.require_subcommand(1);

  std::string out = "data", data = "data", config_path, ck_path, teacher_path, prefix = "render";
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int n = 64, cue_n = 64, epochs = 5, idx = 0;
  std::uint64_t seed = 1;
  bool resume = false;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen->add_option("--n", n, "number of training scenes");
  gen->add_option("--cue-n", cue_n, "number of cue-conflict scenes (0 to skip)");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--out", out, "dataset root directory");

  auto* pre = app.add_subcommand("pretrain-teacher", "train the frozen teacher encoder");
  pre->add_option("--data", data, "dataset root");
  pre->add_option("--out", ck_path, "teacher checkpoint path")->required();
  pre->add_option("--epochs", epochs, "pretraining epochs");
  pre->add_option("--seed", seed, "rng seed");

  auto* trn = app.add_subcommand("train", "run 3D-prior fine-tuning");
  trn->add_option("--config", config_path, "flat key=value config file");
  trn->add_option("--set", sets, "override config keys (key=value)");
  trn->add_flag("--resume", resume, "resume from out_dir/last.tpck");

  auto* ev = app.add_subcommand("eval", "probe/robustness/shape-bias evaluation");
  ev->add_option("--checkpoint", ck_path, "model or teacher checkpoint")->required();
  ev->add_option("--data", data, "dataset root");
  ev->add_option("--teacher", teacher_path, "teacher checkpoint for drift");
  ev->add_option("--seed", seed, "probe split seed");

  auto* ab = app.add_subcommand("ablate", "run the ablation grid");
  ab->add_option("--config", config_path, "base config file");
  ab->add_option("--set", sets, "override config keys (key=value)");
  ab->add_option("--seeds", seeds, "seeds for the grid");
  ab->add_option("--out", out, "output directory")->required();

  auto* ren = app.add_subcommand("render", "render a reconstruction from a checkpoint");
  ren->add_option("--checkpoint", ck_path, "trained checkpoint")->required();
  ren->add_option("--data", data, "dataset root");
  ren->add_option("--idx", idx, "dataset item index");
  ren->add_option("--out", prefix, "output file prefix");
  ren->add_option("--seed", seed, "sampling seed");

  app.add_subcommand("grad-check", "finite-difference gradient verification");

  auto* rep = app.add_subcommand("report", "plots and markdown summary from CSVs");
  rep->add_option("--run", data, "run directory holding metrics/ablation CSVs")->required();
  rep->add_option("--out", out, "report output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // 0 for --help, 1-ish codes for bad flags
  }

  try {
    if (gen->parsed()) return cmd_gen_data(out, n, cue_n, seed);
    if (pre->parsed()) return cmd_pretrain_teacher(data, ck_path, epochs, seed);
    if (trn->parsed()) return cmd_train(config_path, sets, resume);
    if (ev->parsed()) return cmd_eval(ck_path, data, teacher_path, seed);
    if (ab->parsed()) return cmd_ablate(config_path, sets, seeds, out);
    if (ren->parsed()) return cmd_render(ck_path, data, idx, prefix, seed);
    if (app.get_subcommand("grad-check")->parsed()) return cmd_grad_check();
    if (rep->parsed()) {
      write_report(data, out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace tp

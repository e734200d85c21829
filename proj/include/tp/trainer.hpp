#pragma once

#include <optional>
#include <string>

#include "tp/io.hpp"
#include "tp/objective.hpp"
#include "tp/renderer.hpp"
#include "tp/scenegen.hpp"
#include "tp/trainer_model.hpp"

// Training loop: encoder -> triplane -> render against the scene's image and
// oracle depth, with distillation toward a frozen teacher encoder. Fully
// deterministic per seed; checkpoints resume bit-exactly because the rng is
// re-derived from (seed, epoch, step) rather than carried as state.

namespace tp {

struct TrainConfig {
  std::string data_root = "data";
  std::string out_dir = "out";
  std::string teacher;  // teacher checkpoint path; required unless no_dist/from_scratch
  int batch = 16;
  double lr = 1e-4;
  int epochs = 10;
  int max_steps = -1;  // optional cap; -1 = run all epochs
  std::uint64_t seed = 0;
  int image_size = 64;
  int render_res = 64;
  int coarse_samples = 8;
  int fine_samples = 8;
  double lambda_rgb = 0.1;
  double lambda_depth = 1.0;
  double lambda_dist = 1.0;
  double lambda_norm = 1e-3;
  int patch = 8;
  int enc_depth = 6;
  int width = 64;
  int heads = 4;
  int tri_r = 8;
  int tri_res = 32;
  int tri_chan = 32;
  int tri_emb = 64;
  int tri_heads = 4;
  int mlp_hidden = 64;
  bool no_triplane = false;
  bool no_dist = false;
  bool from_scratch = false;
  double data_fraction = 1.0;
  int checkpoint_every = 100;

  EncoderConfig encoder_config() const;
  TriplaneConfig triplane_config() const;
  LossWeights<float> loss_weights() const;
  void validate() const;
};

// Flat `key = value` text; '#' comments; unknown keys rejected.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string echo_config(const TrainConfig& cfg);

// ------------------------------------------------------------------- Adam

struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<float>> m, v;

  void init(const ParamList<float>& params);
  void step(const ParamList<float>& params);  // reads grads, writes values
};

// ------------------------------------------------------------------ loop

struct StepMetrics {
  std::uint64_t step = 0;
  int epoch = 0;
  double rgb = 0, depth = 0, dist = 0, norm = 0, total = 0;
  double wall_ms = 0;
};

struct Trainer {
  TrainConfig cfg;
  Model model;
  std::optional<Model> teacher;
  std::string teacher_hash;  // over teacher parameter bytes
  Adam opt;
  std::uint64_t step = 0;
  std::vector<StepMetrics> history;

  static Trainer create(const TrainConfig& cfg);
  // Restores model, moments, and step from out_dir/last.tpck.
  static Trainer resume(const TrainConfig& cfg);

  // One optimization step on the given items (epoch used for rng derivation).
  StepMetrics train_step(const std::vector<DatasetItem>& batch, int epoch);
  // Full run: epoch loop, shuffled batches, metrics CSV, checkpoints.
  void train();

  void save_checkpoint(const std::string& path) const;
  Checkpoint to_checkpoint() const;
  void load_from(const Checkpoint& ck);
};

// Identical geometric transform on image and oracle depth: random crop with
// scale in [0.8, 1] resized back, then horizontal flip with probability 1/2.
void augment(Image& image, Image& depth, Rng& rng);

// Dataset item loading at the configured image size.
void load_item(const DatasetManifest& m, const DatasetItem& it, int image_size,
               Image& image, Image& depth);

std::string param_hash(const ParamList<float>& params);

}  // namespace tp

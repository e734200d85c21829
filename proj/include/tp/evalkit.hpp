#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tp/trainer.hpp"

// Evaluation protocols: teacher pretraining on shape classification, linear
// probing of frozen features, shape-bias measurement on cue-conflict scenes,
// toy appearance-shift robustness, feature drift, and the ablation grid.

namespace tp {

struct ProbeResult {
  double accuracy = 0;
  std::vector<double> per_class;
  int train_n = 0, val_n = 0;
  std::uint64_t seed = 0;
};

struct ShapeBiasResult {
  int shape_matches = 0, texture_matches = 0, other = 0;
  std::optional<double> bias;  // shape/(shape+texture); empty when both zero
};

// Multinomial logistic-regression head on pooled features, trained with a
// fixed seeded budget; mean/std feature normalization baked in.
struct ProbeHead {
  std::vector<float> w;  // [D, K]
  std::vector<float> b;  // [K]
  std::vector<float> mu, sigma;
  int dim = 0, classes = 0;

  int predict(const std::vector<float>& pooled) const;
};

enum class Perturbation { Identity, TextureSwap, Grayscale, ColorNoise };

// Pooled feature of one image under no-grad; image is [S,S,3] floats.
std::vector<float> pooled_features(const VitEncoder<float>& enc, const Image& img);

// Encoder + linear head trained on shape classification; the head is
// discarded and the encoder saved (tensors "enc.*") as the frozen teacher.
// Returns the held-out probe accuracy of the saved teacher.
double pretrain_teacher(const std::string& data_root, const std::string& out_path,
                        int epochs, std::uint64_t seed, const EncoderConfig& ec);

// 75/25 split probing of a frozen encoder.
std::pair<ProbeResult, ProbeHead> linear_probe(const VitEncoder<float>& enc,
                                               const DatasetManifest& data,
                                               std::uint64_t seed);

ShapeBiasResult shape_bias(const VitEncoder<float>& enc, const ProbeHead& head,
                           const DatasetManifest& cue_conflict, int image_size);

// Probe accuracy on the held-out split under an appearance perturbation.
double robustness_eval(const VitEncoder<float>& enc, const ProbeHead& head,
                       const DatasetManifest& data, Perturbation p,
                       std::uint64_t seed);

// Mean over items of the per-element mean squared grid difference.
double feature_drift(const VitEncoder<float>& student, const VitEncoder<float>& teacher,
                     const DatasetManifest& data, int image_size);

struct AblationRow {
  std::string variant;
  std::string metric;
  std::uint64_t seed = 0;
  double value = 0;
  bool failed = false;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string csv_path;
  std::string summary_path;

  // mean over seeds for one (variant, metric); NaN if all runs failed
  double mean(const std::string& variant, const std::string& metric) const;
};

// Runs {full, no_dist, no_triplane, from_scratch, data 1/16, data 1/4} over
// the given seeds with shared data/teacher, measuring probe accuracy,
// texture-perturbed accuracy, shape bias, and feature drift for each.
AblationResult ablate(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                      const std::string& out_dir);

// Loads the encoder stored under `prefix` in a checkpoint.
VitEncoder<float> load_encoder(const std::string& ck_path, const EncoderConfig& ec,
                               const std::string& prefix);

}  // namespace tp

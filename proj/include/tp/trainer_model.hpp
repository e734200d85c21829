#pragma once

#include "tp/encoder.hpp"
#include "tp/io.hpp"
#include "tp/renderer.hpp"
#include "tp/triplane.hpp"

// The trainable model: ViT encoder, triplane decoder, radiance MLP — or the
// encoder plus a direct convolutional decoder when the triplane path is
// ablated. float-typed; the gradient checker rebuilds pieces in double.

namespace tp {

struct Model {
  VitEncoder<float> enc;
  TriplaneDecoder<float> dec;
  RadianceMlp<float> mlp;
  ConvDecoder<float> conv;
  bool use_conv = false;

  static Model init(const EncoderConfig& ec, const TriplaneConfig& tc, int mlp_hidden,
                    bool no_triplane, int render_res, Rng& rng);

  ParamList<float> params() const;
  void freeze();  // drops requires_grad on every parameter (teacher use)
  void store(Checkpoint& ck, const std::string& prefix) const;
  void load(const Checkpoint& ck, const std::string& prefix);
  // Copies parameter values from another model with identical config.
  void copy_from(const Model& other);
};

}  // namespace tp

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inrv/field.hpp"
#include "inrv/hypernet.hpp"
#include "inrv/semantic.hpp"
#include "inrv/video.hpp"

namespace inrv {

enum class Regularization { None, Gaussian, Semantic, GaussianSemantic };

Regularization parse_regularization(const std::string& text);
std::string to_string(Regularization mode);
inline bool uses_semantic(Regularization r) {
  return r == Regularization::Semantic || r == Regularization::GaussianSemantic;
}
inline bool uses_gaussian(Regularization r) {
  return r == Regularization::Gaussian || r == Regularization::GaussianSemantic;
}

// Bookkeeping persisted alongside the weights.
struct ModelMeta {
  std::uint64_t seed = 0;
  std::string profile = "test";
  Regularization regularization = Regularization::Semantic;
  std::size_t stage = 0;       // number of completed progressive stages
  std::size_t num_stages = 0;  // planned stages
  VideoDims train_dims;        // dimensions of the training videos
  std::string config_hash;
  std::uint64_t semantic_seed = 0;
};

// Everything a checkpoint holds: the meta-network, the codebook and the frozen
// semantic encoder.
struct Model {
  ModelConfig config;
  HypernetWeights weights;
  LatentCodebook codebook;
  SemanticEncoder encoder;
  ModelMeta meta;

  // Fresh weights, empty codebook, freshly drawn frozen encoder.
  static Model create(const ModelConfig& config, std::uint64_t seed, Regularization regularization);

  ThetaLayout layout() const { return ThetaLayout(config.field); }
  bool semantic_enabled() const { return uses_semantic(meta.regularization); }

  // g used for fusion: the cached semantic code, or zeros when semantic
  // conditioning is off.
  Tensor fusion_semantic(std::size_t n) const;
  Tensor instance_code(std::size_t n) const;
  std::vector<Tensor> instance_codes() const;
  Tensor theta(const Tensor& m) const;
  VideoTensor render(const Tensor& m, VideoDims dims, std::size_t chunk_size = 8192) const;
};

}  // namespace inrv

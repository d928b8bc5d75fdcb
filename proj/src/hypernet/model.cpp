#include "inrv/model.hpp"

#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

Regularization parse_regularization(const std::string& text) {
  if (text == "none") return Regularization::None;
  if (text == "gaussian") return Regularization::Gaussian;
  if (text == "semantic") return Regularization::Semantic;
  if (text == "gaussian+semantic") return Regularization::GaussianSemantic;
  throw UsageError("unknown regularization mode '" + text + "'");
}

std::string to_string(Regularization mode) {
  switch (mode) {
    case Regularization::None: return "none";
    case Regularization::Gaussian: return "gaussian";
    case Regularization::Semantic: return "semantic";
    case Regularization::GaussianSemantic: return "gaussian+semantic";
  }
  return "none";
}

Model Model::create(const ModelConfig& config, std::uint64_t seed, Regularization regularization) {
  Model model;
  model.config = config;
  Philox root(seed);
  model.weights = HypernetWeights::init(config, root.split(1).next_u64());
  model.codebook = LatentCodebook(config.context_dim, config.semantic_dim);
  model.meta.seed = seed;
  model.meta.regularization = regularization;
  model.meta.semantic_seed = root.split(2).next_u64();
  model.encoder = SemanticEncoder::create(model.meta.semantic_seed, config.semantic_dim, config.semantic_dim, 3);
  return model;
}

Tensor Model::fusion_semantic(std::size_t n) const {
  if (semantic_enabled()) return codebook.semantic(n);
  return Tensor({config.semantic_dim});
}

Tensor Model::instance_code(std::size_t n) const {
  if (n >= codebook.size()) {
    throw UsageError("code index " + std::to_string(n) + " outside codebook of size " +
                     std::to_string(codebook.size()));
  }
  return fuse_latent(codebook.context(n), fusion_semantic(n), weights.fusion);
}

std::vector<Tensor> Model::instance_codes() const {
  std::vector<Tensor> out;
  out.reserve(codebook.size());
  for (std::size_t n = 0; n < codebook.size(); ++n) out.push_back(instance_code(n));
  return out;
}

Tensor Model::theta(const Tensor& m) const { return hypernet_forward(weights, layout(), m); }

VideoTensor Model::render(const Tensor& m, VideoDims dims, std::size_t chunk_size) const {
  return render_video(theta(m), layout(), dims, chunk_size);
}

}  // namespace inrv

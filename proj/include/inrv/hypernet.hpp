#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "inrv/field.hpp"
#include "inrv/graph.hpp"
#include "inrv/tensor.hpp"

namespace inrv {

// Sizes of everything that is learned or derived. The two named profiles
// share all code paths; `test` is small enough for desk-scale runs.
struct ModelConfig {
  FieldArch field;
  std::size_t head_hidden = 256;
  std::size_t fusion_hidden = 256;
  std::size_t context_dim = 512;
  std::size_t semantic_dim = 512;
  std::size_t instance_dim = 128;
  // Scale applied to the initial output weights of every head.
  double head_out_scale = 0.1;

  static ModelConfig paper();
  static ModelConfig test();
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Plain multilayer perceptron: ReLU after every layer except the last.
// weights[i] is [in x out] so that y = x * W + b on row vectors.
struct Mlp {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  // Uniform fan-in init of every layer; widths = {in, hidden..., out}.
  static Mlp init(const std::vector<std::size_t>& widths, std::uint64_t seed);

  std::size_t input_dim() const { return weights.front().dim(0); }
  std::size_t output_dim() const { return weights.back().dim(1); }
  std::size_t num_params() const;
};

struct MlpNodes {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};

MlpNodes bind_mlp(Graph& graph, const Mlp& mlp, bool requires_grad, const std::string& name);
// x is [batch x in]; returns [batch x out].
NodeId mlp_forward(Graph& graph, const MlpNodes& mlp, NodeId x);
// Graph-free evaluation of a single input row.
Tensor mlp_apply(const Mlp& mlp, const Tensor& x);

// The meta-network: one head per field layer mapping an instance code to that
// layer's weight+bias block, plus the fusion network producing instance codes
// from (context, semantic) pairs.
struct HypernetWeights {
  std::vector<Mlp> heads;
  Mlp fusion;

  static HypernetWeights init(const ModelConfig& config, std::uint64_t seed);
  std::size_t num_params() const;
};

struct HypernetNodes {
  std::vector<MlpNodes> heads;
  MlpNodes fusion;
};

HypernetNodes bind_hypernet(Graph& graph, const HypernetWeights& weights, bool requires_grad);

// m is [batch x instance_dim]; returns theta as [batch x total_len].
NodeId build_hypernet(Graph& graph, const HypernetNodes& nodes, NodeId m);
// c is [batch x context_dim], g is [batch x semantic_dim]; returns m.
NodeId build_fusion(Graph& graph, const MlpNodes& fusion, NodeId c, NodeId g);

// theta = d(m) for a single code (rank-1, instance_dim).
Tensor hypernet_forward(const HypernetWeights& weights, const ThetaLayout& layout, const Tensor& m);
// m = phi(concat(c, g)).
Tensor fuse_latent(const Tensor& c, const Tensor& g, const Mlp& fusion);

// Throws ShapeError unless the heads emit exactly the layout's blocks.
void check_heads(const HypernetWeights& weights, const ThetaLayout& layout, const ModelConfig& config);

// Per-video learnable context codes c_n and frozen semantic codes g_n.
class LatentCodebook {
 public:
  LatentCodebook() = default;
  LatentCodebook(std::size_t context_dim, std::size_t semantic_dim)
      : context_dim_(context_dim), semantic_dim_(semantic_dim) {}

  std::size_t size() const { return context_.size(); }
  std::size_t context_dim() const { return context_dim_; }
  std::size_t semantic_dim() const { return semantic_dim_; }

  const Tensor& context(std::size_t n) const { return context_.at(n); }
  Tensor& context(std::size_t n) { return context_.at(n); }
  const Tensor& semantic(std::size_t n) const { return semantic_.at(n); }

  void append(Tensor context, Tensor semantic);

 private:
  std::size_t context_dim_ = 0;
  std::size_t semantic_dim_ = 0;
  std::vector<Tensor> context_;
  std::vector<Tensor> semantic_;
};

// Grows the codebook to new_total entries. New context codes are drawn from
// N(0, sigma^2) on a per-index stream of `seed`, so code n is the same no
// matter how many stages created it; existing entries are copied bit-exactly.
// `semantic` supplies g for the added indices, in order.
LatentCodebook codebook_extend(const LatentCodebook& old, std::size_t new_total, const std::vector<Tensor>& semantic,
                               std::uint64_t seed, double sigma);
LatentCodebook codebook_init(std::size_t count, std::size_t context_dim, std::size_t semantic_dim,
                             const std::vector<Tensor>& semantic, std::uint64_t seed, double sigma);

}  // namespace inrv

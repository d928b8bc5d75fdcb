#pragma once

#include <optional>
#include <span>
#include <vector>

#include "inrv/graph.hpp"
#include "inrv/hypernet.hpp"
#include "inrv/model.hpp"
#include "inrv/video.hpp"

namespace inrv::detail {

// One evaluation of the multi-video objective. The graph owns copies of the
// weights; `learnable` pairs each weight leaf with the model tensor it came
// from so optimizers can write updates back.
struct Objective {
  Graph graph;
  HypernetNodes nodes;
  NodeId codes{};  // context codes, batch x context_dim
  NodeId instance{};
  NodeId reconstruction{};
  std::optional<NodeId> kl;
  NodeId total{};
};

// features: rows of the field encoding for the sampled pixels; targets[k]:
// the matching RGB rows of the k-th video.
Objective build_objective(const Model& model, std::span<const std::size_t> indices, const Tensor& features,
                          const std::vector<Tensor>& targets, double kl_weight, bool requires_grad);

// Model tensors in the same order as their leaves appear in `nodes`.
std::vector<std::pair<NodeId, Tensor*>> weight_leaves(const HypernetNodes& nodes, HypernetWeights& weights);

}  // namespace inrv::detail

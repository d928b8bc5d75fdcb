#include <algorithm>
#include <cmath>

#include "inrv/errors.hpp"
#include "inrv/trainer.hpp"
#include "objective.hpp"

namespace inrv {

namespace {

constexpr double kVarianceFloor = 1e-16;  // sigma floored at 1e-8

}  // namespace

double reconstruction_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("reconstruction loss: prediction " + shape_string(pred.shape()) + " vs target " +
                     shape_string(target.shape()));
  }
  Graph g;
  return g.evaluate(reconstruction_loss(g, g.leaf(pred), g.leaf(target)))[0];
}

NodeId reconstruction_loss(Graph& graph, NodeId pred, NodeId target) {
  return graph.reduce_mean(graph.square(graph.sub(pred, target)));
}

double gaussian_kl(const Tensor& codes) {
  if (codes.rank() != 2) throw ShapeError("gaussian KL expects a codes matrix, got " + shape_string(codes.shape()));
  Graph g;
  return g.evaluate(gaussian_kl(g, g.leaf(codes)))[0];
}

NodeId gaussian_kl(Graph& graph, NodeId codes) {
  const Shape& shape = graph.shape(codes);
  if (shape.size() != 2) throw ShapeError("gaussian KL expects a codes matrix, got " + shape_string(shape));
  if (shape[0] < 2) {
    throw UsageError("gaussian KL needs at least two codes, got " + std::to_string(shape[0]));
  }
  const NodeId mean = graph.reduce_mean(codes, 0);
  const NodeId centered = graph.add_row(codes, graph.scale(mean, -1.0));
  const NodeId var = graph.clamp_min(graph.reduce_mean(graph.square(centered), 0), kVarianceFloor);
  // -log(sigma) + (sigma^2 + mu^2) / 2 - 1/2 per dimension
  const NodeId per_dim = graph.add_scalar(
      graph.scale(graph.add(graph.scale(graph.log(var), -1.0), graph.add(var, graph.square(mean))), 0.5), -0.5);
  return graph.reduce_mean(per_dim);
}

PixelFeatures::PixelFeatures(VideoDims d, std::size_t num_bands)
    : dims(d), features(positional_encode(make_grid(d).coords, num_bands)) {}

Tensor PixelFeatures::rows(std::span<const std::size_t> pixels) const {
  const std::size_t width = features.dim(1);
  Tensor out({pixels.size(), width});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto src = features.row(pixels[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor pixel_targets(const VideoTensor& video, std::span<const std::size_t> pixels) {
  Tensor out({pixels.size(), VideoTensor::kChannels});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i] >= video.num_pixels()) {
      throw UsageError("pixel " + std::to_string(pixels[i]) + " outside a video of " +
                       std::to_string(video.num_pixels()) + " pixels");
    }
    const auto px = video.pixel(pixels[i]);
    std::copy(px.begin(), px.end(), out.row(i).begin());
  }
  return out;
}

namespace detail {

Objective build_objective(const Model& model, std::span<const std::size_t> indices, const Tensor& features,
                          const std::vector<Tensor>& targets, double kl_weight, bool requires_grad) {
  const std::size_t batch = indices.size();
  if (batch == 0 || targets.size() != batch) throw UsageError("objective needs one target per code index");
  const auto& cfg = model.config;
  const ThetaLayout layout = model.layout();

  Objective o;
  Graph& g = o.graph;
  o.nodes = bind_hypernet(g, model.weights, requires_grad);

  Tensor context({batch, cfg.context_dim});
  Tensor semantic({batch, cfg.semantic_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& c = model.codebook.context(indices[b]);
    const Tensor s = model.fusion_semantic(indices[b]);
    std::copy(c.data().begin(), c.data().end(), context.row(b).begin());
    std::copy(s.data().begin(), s.data().end(), semantic.row(b).begin());
  }
  o.codes = g.leaf(std::move(context.set_requires_grad(requires_grad)), "context");
  const NodeId sem = g.leaf(std::move(semantic), "semantic");
  o.instance = build_fusion(g, o.nodes.fusion, o.codes, sem);
  const NodeId theta = build_hypernet(g, o.nodes, o.instance);

  const NodeId feats = g.leaf(features, "features");
  std::vector<NodeId> errors;
  errors.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const NodeId pred = build_field(g, g.row(theta, b), feats, layout);
    errors.push_back(g.square(g.sub(pred, g.leaf(targets[b], "target"))));
  }
  o.reconstruction = g.reduce_mean(batch == 1 ? errors.front() : g.concat(errors, 0));
  o.total = o.reconstruction;
  if (uses_gaussian(model.meta.regularization) && batch >= 2) {
    o.kl = gaussian_kl(g, o.instance);
    o.total = g.add(o.reconstruction, g.scale(*o.kl, kl_weight));
  }
  return o;
}

std::vector<std::pair<NodeId, Tensor*>> weight_leaves(const HypernetNodes& nodes, HypernetWeights& weights) {
  std::vector<std::pair<NodeId, Tensor*>> out;
  auto add = [&](const MlpNodes& n, Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
      out.emplace_back(n.weights[i], &mlp.weights[i]);
      out.emplace_back(n.biases[i], &mlp.biases[i]);
    }
  };
  for (std::size_t h = 0; h < weights.heads.size(); ++h) add(nodes.heads[h], weights.heads[h]);
  add(nodes.fusion, weights.fusion);
  return out;
}

}  // namespace detail

LossParts batch_loss(const Model& model, std::span<const VideoTensor> videos, std::span<const std::size_t> indices,
                     std::span<const std::size_t> pixels, double kl_weight) {
  if (videos.size() != indices.size()) throw UsageError("batch loss needs one video per code index");
  const VideoDims dims = videos.front().dims();
  std::vector<Tensor> targets;
  for (const auto& v : videos) {
    if (!(v.dims() == dims)) throw ShapeError("videos in one batch must share their dimensions");
    targets.push_back(pixel_targets(v, pixels));
  }
  const Tensor features = positional_encode(grid_coords(dims, pixels), model.config.field.num_bands);
  auto o = detail::build_objective(model, indices, features, targets, kl_weight, false);
  LossParts parts;
  parts.total = o.graph.evaluate(o.total)[0];
  parts.reconstruction = o.graph.value(o.reconstruction)[0];
  if (o.kl) parts.kl = o.graph.value(*o.kl)[0];
  return parts;
}

double single_inr_loss(const Tensor& theta, const ThetaLayout& layout, const VideoTensor& video,
                       std::span<const std::size_t> pixels) {
  Graph g;
  const NodeId th = g.leaf(theta.reshaped({theta.size()}).set_requires_grad(false), "theta");
  const NodeId feats =
      g.leaf(positional_encode(grid_coords(video.dims(), pixels), layout.arch().num_bands), "features");
  const NodeId pred = build_field(g, th, feats, layout);
  return g.evaluate(reconstruction_loss(g, pred, g.leaf(pixel_targets(video, pixels), "target")))[0];
}

}  // namespace inrv

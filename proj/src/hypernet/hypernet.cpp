#include "inrv/hypernet.hpp"

#include <algorithm>

#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.field = {8, 256};
  c.head_hidden = 256;
  c.fusion_hidden = 256;
  return c;
}

ModelConfig ModelConfig::test() {
  ModelConfig c;
  c.field = {4, 64};
  c.head_hidden = 128;
  c.fusion_hidden = 128;
  return c;
}

Mlp Mlp::init(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw UsageError("an MLP needs at least an input and an output width");
  Mlp mlp;
  Philox root(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    auto stream = root.split(l);
    mlp.weights.push_back(seeded_init({in, out}, InitScheme::uniform_fan_in(in), stream.next_u64()));
    mlp.biases.push_back(seeded_init({out}, InitScheme::uniform_fan_in(in), stream.next_u64()));
  }
  return mlp;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

MlpNodes bind_mlp(Graph& graph, const Mlp& mlp, bool requires_grad, const std::string& name) {
  MlpNodes nodes;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    Tensor w = mlp.weights[l];
    Tensor b = mlp.biases[l];
    nodes.weights.push_back(graph.leaf(std::move(w.set_requires_grad(requires_grad)), name + ".w" + std::to_string(l)));
    nodes.biases.push_back(graph.leaf(std::move(b.set_requires_grad(requires_grad)), name + ".b" + std::to_string(l)));
  }
  return nodes;
}

NodeId mlp_forward(Graph& graph, const MlpNodes& mlp, NodeId x) {
  NodeId h = x;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    h = graph.add_row(graph.matmul(h, mlp.weights[l]), mlp.biases[l]);
    if (l + 1 < mlp.weights.size()) h = graph.relu(h);
  }
  return h;
}

Tensor mlp_apply(const Mlp& mlp, const Tensor& x) {
  Graph g;
  const NodeId in = g.leaf(x.reshaped({1, x.size()}).set_requires_grad(false), "x");
  const NodeId out = mlp_forward(g, bind_mlp(g, mlp, false, "mlp"), in);
  const Tensor& y = g.evaluate(out);
  return y.reshaped({y.size()});
}

HypernetWeights HypernetWeights::init(const ModelConfig& config, std::uint64_t seed) {
  const ThetaLayout layout(config.field);
  Philox root(seed);
  HypernetWeights w;
  const std::size_t hh = config.head_hidden;
  for (std::size_t l = 0; l < layout.layers().size(); ++l) {
    const auto& ls = layout.layers()[l];
    auto stream = root.split(l);
    Mlp head = Mlp::init({config.instance_dim, hh, hh, hh, ls.params()}, stream.next_u64());
    // Output layer: damped weights, bias set to a standard init of the field
    // layer it emits, so the initial theta is a well-scaled field.
    for (auto& v : head.weights.back().data()) v *= config.head_out_scale;
    head.biases.back() = seeded_init({ls.params()}, InitScheme::uniform_fan_in(ls.in), stream.next_u64());
    w.heads.push_back(std::move(head));
  }
  const std::size_t fh = config.fusion_hidden;
  w.fusion = Mlp::init({config.context_dim + config.semantic_dim, fh, fh, fh, config.instance_dim},
                       root.split(1000).next_u64());
  return w;
}

std::size_t HypernetWeights::num_params() const {
  std::size_t n = fusion.num_params();
  for (const auto& h : heads) n += h.num_params();
  return n;
}

HypernetNodes bind_hypernet(Graph& graph, const HypernetWeights& weights, bool requires_grad) {
  HypernetNodes nodes;
  for (std::size_t l = 0; l < weights.heads.size(); ++l) {
    nodes.heads.push_back(bind_mlp(graph, weights.heads[l], requires_grad, "head" + std::to_string(l)));
  }
  nodes.fusion = bind_mlp(graph, weights.fusion, requires_grad, "fusion");
  return nodes;
}

NodeId build_hypernet(Graph& graph, const HypernetNodes& nodes, NodeId m) {
  std::vector<NodeId> blocks;
  for (const auto& head : nodes.heads) blocks.push_back(mlp_forward(graph, head, m));
  return graph.concat(blocks, 1);
}

NodeId build_fusion(Graph& graph, const MlpNodes& fusion, NodeId c, NodeId g) {
  return mlp_forward(graph, fusion, graph.concat({c, g}, 1));
}

void check_heads(const HypernetWeights& weights, const ThetaLayout& layout, const ModelConfig& config) {
  if (weights.heads.size() != layout.layers().size()) {
    throw ShapeError("hypernetwork has " + std::to_string(weights.heads.size()) + " heads, field has " +
                     std::to_string(layout.layers().size()) + " layers");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights.heads.size(); ++l) {
    const auto& head = weights.heads[l];
    if (head.input_dim() != config.instance_dim || head.output_dim() != layout.layer_length(l)) {
      throw ShapeError("head " + std::to_string(l) + " maps " + std::to_string(head.input_dim()) + " -> " +
                       std::to_string(head.output_dim()) + ", layout needs " + std::to_string(config.instance_dim) +
                       " -> " + std::to_string(layout.layer_length(l)));
    }
    total += head.output_dim();
  }
  if (total != layout.total_len()) throw ShapeError("head outputs do not cover theta");
}

Tensor hypernet_forward(const HypernetWeights& weights, const ThetaLayout& layout, const Tensor& m) {
  if (weights.heads.empty() || m.size() != weights.heads.front().input_dim()) {
    throw ShapeError("instance code has " + std::to_string(m.size()) + " values");
  }
  std::size_t total = 0;
  for (const auto& h : weights.heads) total += h.output_dim();
  if (total != layout.total_len()) throw ShapeError("head outputs do not match the theta layout");
  Graph g;
  const NodeId mn = g.leaf(m.reshaped({1, m.size()}).set_requires_grad(false), "m");
  HypernetNodes nodes;
  for (std::size_t l = 0; l < weights.heads.size(); ++l) {
    nodes.heads.push_back(bind_mlp(g, weights.heads[l], false, "head" + std::to_string(l)));
  }
  const Tensor& theta = g.evaluate(build_hypernet(g, nodes, mn));
  return theta.reshaped({theta.size()});
}

Tensor fuse_latent(const Tensor& c, const Tensor& g, const Mlp& fusion) {
  if (c.size() + g.size() != fusion.input_dim()) {
    throw ShapeError("fusion expects " + std::to_string(fusion.input_dim()) + " inputs, got " +
                     std::to_string(c.size()) + " + " + std::to_string(g.size()));
  }
  Graph graph;
  const NodeId cn = graph.leaf(c.reshaped({1, c.size()}).set_requires_grad(false), "c");
  const NodeId gn = graph.leaf(g.reshaped({1, g.size()}).set_requires_grad(false), "g");
  const NodeId m = build_fusion(graph, bind_mlp(graph, fusion, false, "fusion"), cn, gn);
  const Tensor& out = graph.evaluate(m);
  return out.reshaped({out.size()});
}

void LatentCodebook::append(Tensor context, Tensor semantic) {
  if (context.size() != context_dim_ || semantic.size() != semantic_dim_) {
    throw ShapeError("codebook entry has " + std::to_string(context.size()) + "/" + std::to_string(semantic.size()) +
                     " values, expected " + std::to_string(context_dim_) + "/" + std::to_string(semantic_dim_));
  }
  context_.push_back(context.reshaped({context_dim_}));
  semantic_.push_back(semantic.reshaped({semantic_dim_}));
}

LatentCodebook codebook_extend(const LatentCodebook& old, std::size_t new_total, const std::vector<Tensor>& semantic,
                               std::uint64_t seed, double sigma) {
  if (new_total < old.size()) {
    throw UsageError("codebook cannot shrink from " + std::to_string(old.size()) + " to " + std::to_string(new_total));
  }
  if (semantic.size() != new_total - old.size()) {
    throw UsageError("codebook extension needs " + std::to_string(new_total - old.size()) + " semantic codes, got " +
                     std::to_string(semantic.size()));
  }
  LatentCodebook out = old;
  Philox root(seed);
  for (std::size_t n = old.size(); n < new_total; ++n) {
    Tensor c = seeded_init({old.context_dim()}, InitScheme::gaussian(sigma), root.split(n).next_u64());
    out.append(std::move(c), semantic[n - old.size()]);
  }
  return out;
}

LatentCodebook codebook_init(std::size_t count, std::size_t context_dim, std::size_t semantic_dim,
                             const std::vector<Tensor>& semantic, std::uint64_t seed, double sigma) {
  return codebook_extend(LatentCodebook(context_dim, semantic_dim), count, semantic, seed, sigma);
}

}  // namespace inrv

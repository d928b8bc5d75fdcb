#include "inrv/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

ThetaLayout::ThetaLayout(const FieldArch& arch) : arch_(arch) {
  if (arch.num_bands == 0 || arch.hidden_width == 0) throw UsageError("field bands and width must be positive");
  const std::size_t hidden = arch.hidden_width;
  layers_ = {{arch.encoding_dim(), hidden}, {hidden, hidden}, {hidden, hidden}, {hidden, FieldArch::kOutDim}};
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& ls = layers_[l];
    segments_.push_back({l, SegmentKind::Weight, offset, ls.in * ls.out});
    offset += ls.in * ls.out;
    segments_.push_back({l, SegmentKind::Bias, offset, ls.out});
    offset += ls.out;
  }
  total_ = offset;
}

ThetaLayout layout_theta(const FieldArch& arch) { return ThetaLayout(arch); }

double grid_coordinate(std::size_t i, std::size_t n) {
  if (n == 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

CoordinateGrid make_grid(VideoDims dims) {
  if (dims.frames == 0 || dims.height == 0 || dims.width == 0) throw UsageError("grid extents must be positive");
  std::vector<std::size_t> all(dims.pixels());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {dims, grid_coords(dims, all)};
}

Tensor grid_coords(VideoDims dims, std::span<const std::size_t> pixels) {
  if (pixels.empty()) throw UsageError("coordinate selection is empty");
  Tensor out({pixels.size(), 3});
  const std::size_t plane = dims.height * dims.width;
  for (std::size_t r = 0; r < pixels.size(); ++r) {
    const std::size_t p = pixels[r];
    if (p >= dims.pixels()) throw UsageError("pixel index " + std::to_string(p) + " outside the grid");
    const std::size_t t = p / plane;
    const std::size_t h = (p % plane) / dims.width;
    const std::size_t w = p % dims.width;
    out.at(r, 0) = grid_coordinate(t, dims.frames);
    out.at(r, 1) = grid_coordinate(h, dims.height);
    out.at(r, 2) = grid_coordinate(w, dims.width);
  }
  return out;
}

Tensor positional_encode(const Tensor& coords, std::size_t num_bands) {
  if (coords.rank() != 2 || coords.dim(1) != 3) {
    throw ShapeError("positional_encode expects N x 3 coordinates, got " + shape_string(coords.shape()));
  }
  if (num_bands == 0) throw UsageError("positional encoding needs at least one band");
  const std::size_t n = coords.dim(0);
  const std::size_t width = 6 * num_bands;
  Tensor out({n, width});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const double x = coords.at(i, axis);
      if (!(x >= -1.0 && x <= 1.0)) {
        throw UsageError("coordinate " + std::to_string(x) + " outside [-1, 1]");
      }
      for (std::size_t k = 0; k < num_bands; ++k) {
        const double arg = std::ldexp(std::numbers::pi, static_cast<int>(k)) * x;
        dst[axis * 2 * num_bands + 2 * k] = std::sin(arg);
        dst[axis * 2 * num_bands + 2 * k + 1] = std::cos(arg);
      }
    }
  }
  return out;
}

NodeId build_field(Graph& graph, NodeId theta, NodeId features, const ThetaLayout& layout) {
  if (shape_size(graph.shape(theta)) != layout.total_len()) {
    throw ShapeError("theta has " + std::to_string(shape_size(graph.shape(theta))) + " values, layout needs " +
                     std::to_string(layout.total_len()));
  }
  NodeId h = features;
  const auto& layers = layout.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& ls = layers[l];
    const std::size_t off = layout.layer_offset(l);
    const NodeId w = graph.reshape(graph.slice(theta, off, ls.in * ls.out), {ls.in, ls.out});
    const NodeId b = graph.slice(theta, off + ls.in * ls.out, ls.out);
    h = graph.add_row(graph.matmul(h, w), b);
    if (l + 1 < layers.size()) h = graph.relu(h);
  }
  return h;
}

Tensor field_forward(const Tensor& theta, const Tensor& coords, const ThetaLayout& layout) {
  if (theta.size() != layout.total_len()) {
    throw ShapeError("theta has " + std::to_string(theta.size()) + " values, layout needs " +
                     std::to_string(layout.total_len()));
  }
  Graph g;
  const NodeId th = g.leaf(theta.reshaped({theta.size()}).set_requires_grad(false), "theta");
  const NodeId feats = g.leaf(positional_encode(coords, layout.arch().num_bands), "features");
  return g.evaluate(build_field(g, th, feats, layout));
}

Tensor init_theta(const ThetaLayout& layout, std::uint64_t seed) {
  Tensor theta({layout.total_len()});
  Philox root(seed);
  for (std::size_t l = 0; l < layout.layers().size(); ++l) {
    const auto& ls = layout.layers()[l];
    const Tensor block = seeded_init({ls.params()}, InitScheme::uniform_fan_in(ls.in), root.split(l).next_u64());
    std::copy(block.data().begin(), block.data().end(), theta.data().begin() + static_cast<std::ptrdiff_t>(layout.layer_offset(l)));
  }
  return theta;
}

VideoTensor render_video(const Tensor& theta, const ThetaLayout& layout, VideoDims dims, std::size_t chunk_size) {
  if (chunk_size == 0) throw UsageError("render chunk size must be positive");
  const std::size_t total = dims.pixels();
  if (total == 0) throw UsageError("render extents must be positive");
  std::vector<double> pixels(total * VideoTensor::kChannels);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < total; start += chunk_size) {
    const std::size_t count = std::min(chunk_size, total - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor out = field_forward(theta, grid_coords(dims, idx), layout);
    for (std::size_t i = 0; i < out.size(); ++i) {
      pixels[start * VideoTensor::kChannels + i] = std::clamp(out[i], 0.0, 1.0);
    }
  }
  return VideoTensor(dims, std::move(pixels));
}

}  // namespace inrv

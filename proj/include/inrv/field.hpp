#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "inrv/graph.hpp"
#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv {

// Coordinate MLP f(t, h, w) -> RGB: periodic encoding, three ReLU hidden
// layers of equal width, linear output.
struct FieldArch {
  static constexpr std::size_t kHiddenLayers = 3;
  static constexpr std::size_t kOutDim = 3;

  std::size_t num_bands = 8;
  std::size_t hidden_width = 256;

  std::size_t encoding_dim() const { return 6 * num_bands; }
  std::size_t num_layers() const { return kHiddenLayers + 1; }
  friend bool operator==(const FieldArch&, const FieldArch&) = default;
};

enum class SegmentKind { Weight, Bias };

struct ThetaSegment {
  std::size_t layer = 0;
  SegmentKind kind = SegmentKind::Weight;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t params() const { return in * out + out; }
};

// Placement of every field weight and bias inside the flat parameter vector.
// Layer l occupies one contiguous block: its [in x out] row-major weight
// followed by its bias.
class ThetaLayout {
 public:
  explicit ThetaLayout(const FieldArch& arch);

  const FieldArch& arch() const { return arch_; }
  const std::vector<ThetaSegment>& segments() const { return segments_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t total_len() const { return total_; }

  // Contiguous [offset, offset + length) block holding layer l.
  std::size_t layer_offset(std::size_t layer) const { return segments_.at(2 * layer).offset; }
  std::size_t layer_length(std::size_t layer) const { return layers_.at(layer).params(); }

 private:
  FieldArch arch_;
  std::vector<LayerShape> layers_;
  std::vector<ThetaSegment> segments_;
  std::size_t total_ = 0;
};

ThetaLayout layout_theta(const FieldArch& arch);

// Position of sample i out of n on the inclusive grid over [-1, 1]; a single
// sample sits at 0.
double grid_coordinate(std::size_t i, std::size_t n);

struct CoordinateGrid {
  VideoDims dims;
  Tensor coords;  // N x 3 rows of (t, h, w), t-major then h then w
};

CoordinateGrid make_grid(VideoDims dims);

// Coordinates of selected pixels (flat t-major indices) of a grid.
Tensor grid_coords(VideoDims dims, std::span<const std::size_t> pixels);

// N x 3 coordinates in [-1, 1] -> N x 6L features. For each axis, then each
// band k, then (sin, cos): sin(2^k pi x), cos(2^k pi x).
Tensor positional_encode(const Tensor& coords, std::size_t num_bands);

// Appends the field MLP to a graph. `theta` is a rank-1 node of length
// layout.total_len(), `features` an N x 6L node; returns the N x 3 output.
NodeId build_field(Graph& graph, NodeId theta, NodeId features, const ThetaLayout& layout);

// Raw (unclamped) field outputs at the given coordinates.
Tensor field_forward(const Tensor& theta, const Tensor& coords, const ThetaLayout& layout);

// Standard per-layer initialization of a standalone field: every weight and
// bias uniform in +-1/sqrt(fan_in) of its layer.
Tensor init_theta(const ThetaLayout& layout, std::uint64_t seed);

// Evaluates the field on make_grid(dims) in chunks of `chunk_size` points
// and clamps into [0, 1]. Chunking only bounds memory; results do not depend
// on it.
VideoTensor render_video(const Tensor& theta, const ThetaLayout& layout, VideoDims dims,
                         std::size_t chunk_size = 8192);

}  // namespace inrv

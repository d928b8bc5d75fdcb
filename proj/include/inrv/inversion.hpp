#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "inrv/model.hpp"
#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv {

enum class MaskKind { Full, TopHalf, FirstFrames, Endpoints, Sparse, LowRes };

MaskKind parse_mask_kind(const std::string& text);
std::string to_string(MaskKind kind);

struct MaskParams {
  std::size_t frames = 4;     // first-k
  double fraction = 0.25;     // sparse
  std::size_t low_height = 0;  // lowres
  std::size_t low_width = 0;
  std::uint64_t seed = 0;     // sparse
};

// The S visible points of an observed video. `pixels` index the observed
// video (ascending, unique) and supply the targets; `coords` are the field
// inputs. They coincide with the grid positions of `pixels` for every kind but
// LowRes, whose coordinates are the coarse grid itself and whose targets come
// from the nearest observed pixel.
struct ContextMask {
  MaskKind kind = MaskKind::Full;
  VideoDims dims;
  MaskParams params;
  std::vector<std::size_t> pixels;
  Tensor coords;  // S x 3

  std::size_t size() const { return pixels.size(); }
};

ContextMask build_mask(MaskKind kind, VideoDims dims, const MaskParams& params = {});

struct InvertConfig {
  std::size_t steps = 500;
  double lr = 1e-2;
  // Starting latent; the mean instance code of the codebook when unset.
  std::optional<Tensor> init;
  std::size_t log_every = 50;
};

struct InversionResult {
  Tensor latent;
  // Masked loss before every step and after the last one (steps + 1 values).
  std::vector<double> trace;
  VideoTensor render;
  // Mean absolute error on the [0, 255] scale over the context points.
  double context_l1 = 0.0;
  double initial_context_l1 = 0.0;
};

// Mean squared error of the field decoded from `latent` over the mask.
double masked_loss(const Model& model, const Tensor& latent, const VideoTensor& observed, const ContextMask& mask);

// Context-L1 of the field decoded from `latent`, outputs clamped to [0, 1].
double masked_l1(const Model& model, const Tensor& latent, const VideoTensor& observed, const ContextMask& mask);

Tensor mean_instance_code(const Model& model);

InversionResult invert(const Model& model, const VideoTensor& observed, const ContextMask& mask,
                       const InvertConfig& config = {}, std::ostream* log = nullptr);

// Inverts a low-resolution video on its own coarse grid and renders the latent
// at frames x height x width.
VideoTensor superresolve(const Model& model, const VideoTensor& low, std::size_t height, std::size_t width,
                         const InvertConfig& config = {}, InversionResult* details = nullptr);

}  // namespace inrv

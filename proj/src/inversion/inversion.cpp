#include "inrv/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "inrv/adam.hpp"
#include "inrv/errors.hpp"
#include "inrv/field.hpp"
#include "inrv/graph.hpp"
#include "inrv/hypernet.hpp"
#include "inrv/metrics.hpp"
#include "inrv/rng.hpp"
#include "inrv/trainer.hpp"

namespace inrv {

namespace {

constexpr std::pair<MaskKind, const char*> kMaskNames[] = {
    {MaskKind::Full, "full"},         {MaskKind::TopHalf, "top-half"}, {MaskKind::FirstFrames, "first-k"},
    {MaskKind::Endpoints, "endpoints"}, {MaskKind::Sparse, "sparse"},  {MaskKind::LowRes, "lowres"},
};

std::size_t nearest_index(double coord, std::size_t n) {
  if (n == 1) return 0;
  const double pos = std::round((coord + 1.0) * 0.5 * static_cast<double>(n - 1));
  return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, pos)));
}

std::string dims_text(const VideoDims& d) {
  return std::to_string(d.frames) + "x" + std::to_string(d.height) + "x" + std::to_string(d.width);
}

void check_observed(const Model& model, const VideoTensor& observed, const ContextMask& mask) {
  if (!(observed.dims() == mask.dims)) {
    throw ShapeError("observed video is " + dims_text(observed.dims()) + " but the mask was built for " +
                     dims_text(mask.dims));
  }
  if (mask.pixels.empty() || mask.coords.rank() != 2 || mask.coords.dim(0) != mask.pixels.size()) {
    throw UsageError("malformed context mask");
  }
  check_heads(model.weights, model.layout(), model.config);
}

// Forward graph of the masked objective for one latent.
struct MaskedGraph {
  Graph graph;
  NodeId latent;
  NodeId loss;
};

MaskedGraph build_masked(const Model& model, const Tensor& latent, const Tensor& features, const Tensor& targets,
                         bool requires_grad) {
  MaskedGraph mg;
  Graph& g = mg.graph;
  const HypernetNodes nodes = bind_hypernet(g, model.weights, false);
  mg.latent = g.leaf(latent.reshaped({1, latent.size()}).set_requires_grad(requires_grad), "latent");
  const NodeId theta = build_hypernet(g, nodes, mg.latent);
  const NodeId pred = build_field(g, g.row(theta, 0), g.leaf(features, "features"), model.layout());
  mg.loss = reconstruction_loss(g, pred, g.leaf(targets, "target"));
  return mg;
}

}  // namespace

MaskKind parse_mask_kind(const std::string& text) {
  for (const auto& [kind, name] : kMaskNames) {
    if (text == name) return kind;
  }
  throw UsageError("unknown mask '" + text + "' (expected full, top-half, first-k, endpoints, sparse or lowres)");
}

std::string to_string(MaskKind kind) {
  for (const auto& [k, name] : kMaskNames) {
    if (k == kind) return name;
  }
  return "?";
}

ContextMask build_mask(MaskKind kind, VideoDims dims, const MaskParams& params) {
  if (dims.pixels() == 0) throw UsageError("mask extents must be positive");
  ContextMask mask;
  mask.kind = kind;
  mask.dims = dims;
  mask.params = params;
  const std::size_t plane = dims.height * dims.width;
  auto& px = mask.pixels;

  switch (kind) {
    case MaskKind::Full:
      px.resize(dims.pixels());
      std::iota(px.begin(), px.end(), 0);
      break;
    case MaskKind::TopHalf:
      for (std::size_t t = 0; t < dims.frames; ++t)
        for (std::size_t i = 0; i < (dims.height / 2) * dims.width; ++i) px.push_back(t * plane + i);
      break;
    case MaskKind::FirstFrames:
      if (params.frames >= dims.frames) {
        throw UsageError("first-k mask needs k < " + std::to_string(dims.frames) + " frames, got " +
                         std::to_string(params.frames));
      }
      px.resize(params.frames * plane);
      std::iota(px.begin(), px.end(), 0);
      break;
    case MaskKind::Endpoints:
      for (std::size_t i = 0; i < plane; ++i) px.push_back(i);
      if (dims.frames > 1)
        for (std::size_t i = 0; i < plane; ++i) px.push_back((dims.frames - 1) * plane + i);
      break;
    case MaskKind::Sparse: {
      if (!(params.fraction > 0.0 && params.fraction <= 1.0)) {
        throw UsageError("sparse mask fraction must lie in (0, 1], got " + std::to_string(params.fraction));
      }
      const auto count = static_cast<std::size_t>(std::llround(params.fraction * static_cast<double>(dims.pixels())));
      std::vector<std::size_t> all(dims.pixels());
      std::iota(all.begin(), all.end(), 0);
      Philox rng(params.seed);
      for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
      px.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
      std::sort(px.begin(), px.end());
      break;
    }
    case MaskKind::LowRes: {
      const std::size_t lh = params.low_height, lw = params.low_width;
      if (lh == 0 || lw == 0 || lh > dims.height || lw > dims.width) {
        throw UsageError("lowres mask needs 1 <= " + std::to_string(lh) + " <= " + std::to_string(dims.height) +
                         " and 1 <= " + std::to_string(lw) + " <= " + std::to_string(dims.width));
      }
      const VideoDims coarse{dims.frames, lh, lw};
      mask.coords = make_grid(coarse).coords;
      for (std::size_t r = 0; r < coarse.pixels(); ++r) {
        const std::size_t h = nearest_index(mask.coords.at(r, 1), dims.height);
        const std::size_t w = nearest_index(mask.coords.at(r, 2), dims.width);
        px.push_back((r / (lh * lw)) * plane + h * dims.width + w);
      }
      break;
    }
  }
  if (px.empty()) throw UsageError(to_string(kind) + " mask on " + dims_text(dims) + " selects no pixels");
  if (kind != MaskKind::LowRes) mask.coords = grid_coords(dims, px);
  return mask;
}

double masked_loss(const Model& model, const Tensor& latent, const VideoTensor& observed, const ContextMask& mask) {
  check_observed(model, observed, mask);
  auto mg = build_masked(model, latent, positional_encode(mask.coords, model.config.field.num_bands),
                         pixel_targets(observed, mask.pixels), false);
  return mg.graph.evaluate(mg.loss)[0];
}

double masked_l1(const Model& model, const Tensor& latent, const VideoTensor& observed, const ContextMask& mask) {
  check_observed(model, observed, mask);
  const Tensor out = field_forward(model.theta(latent), mask.coords, model.layout());
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    const auto truth = observed.pixel(mask.pixels[i]);
    for (std::size_t c = 0; c < VideoTensor::kChannels; ++c) {
      sum += std::abs(std::clamp(out.at(i, c), 0.0, 1.0) - truth[c]) * kPixelScale;
    }
  }
  return sum / static_cast<double>(mask.pixels.size() * VideoTensor::kChannels);
}

Tensor mean_instance_code(const Model& model) {
  if (model.codebook.size() == 0) throw UsageError("the checkpoint has an empty codebook");
  Tensor mean({model.config.instance_dim});
  for (const Tensor& m : model.instance_codes()) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m[i];
  }
  for (auto& v : mean.data()) v /= static_cast<double>(model.codebook.size());
  return mean;
}

InversionResult invert(const Model& model, const VideoTensor& observed, const ContextMask& mask,
                       const InvertConfig& config, std::ostream* log) {
  check_observed(model, observed, mask);
  if (!(config.lr > 0.0)) throw UsageError("inversion learning rate must be positive");
  InversionResult result;
  result.latent = config.init ? config.init->reshaped({config.init->size()}) : mean_instance_code(model);
  if (result.latent.size() != model.config.instance_dim) {
    throw ShapeError("initial latent has " + std::to_string(result.latent.size()) + " values, expected " +
                     std::to_string(model.config.instance_dim));
  }
  const Tensor features = positional_encode(mask.coords, model.config.field.num_bands);
  const Tensor targets = pixel_targets(observed, mask.pixels);
  result.initial_context_l1 = masked_l1(model, result.latent, observed, mask);

  const AdamConfig adam{config.lr};
  AdamState state = AdamState::like(result.latent);
  for (std::size_t step = 0; step <= config.steps; ++step) {
    auto mg = build_masked(model, result.latent, features, targets, step < config.steps);
    const double loss = mg.graph.evaluate(mg.loss)[0];
    if (!std::isfinite(loss)) {
      throw NumericError("inversion diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) + ")");
    }
    result.trace.push_back(loss);
    if (log && config.log_every > 0 && (step % config.log_every == 0 || step == config.steps)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step=%zu loss=%.6g\n", step, loss);
      *log << buf << std::flush;
    }
    if (step == config.steps) break;
    const Tensor grad = mg.graph.backward(mg.loss).at(mg.latent).reshaped({result.latent.size()});
    adam_step(result.latent, grad, state, adam);
  }
  result.render = model.render(result.latent, observed.dims());
  result.context_l1 = masked_l1(model, result.latent, observed, mask);
  return result;
}

VideoTensor superresolve(const Model& model, const VideoTensor& low, std::size_t height, std::size_t width,
                         const InvertConfig& config, InversionResult* details) {
  if (height < low.height() || width < low.width()) {
    throw UsageError("superresolution target " + std::to_string(height) + "x" + std::to_string(width) +
                     " is smaller than the source " + std::to_string(low.height()) + "x" + std::to_string(low.width()));
  }
  MaskParams params;
  params.low_height = low.height();
  params.low_width = low.width();
  const ContextMask mask = build_mask(MaskKind::LowRes, low.dims(), params);
  InversionResult r = invert(model, low, mask, config);
  VideoTensor out = model.render(r.latent, {low.frames(), height, width});
  if (details) *details = std::move(r);
  return out;
}

}  // namespace inrv

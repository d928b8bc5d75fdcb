#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inrv/field.hpp"
#include "inrv/graph.hpp"
#include "inrv/model.hpp"
#include "inrv/video.hpp"

namespace inrv {

struct TrainConfig {
  double lr = 1e-4;
  // Stage exit threshold on the mean per-pixel MSE in [0, 1] space.
  double threshold = 1e-3;
  // Epoch cap per stage; the last entry applies to every later stage.
  std::vector<std::size_t> max_epochs{300};
  std::size_t pixel_batch = 1024;
  std::size_t video_batch = 10;
  Regularization regularization = Regularization::Semantic;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
  std::string profile = "test";
  ModelConfig model = ModelConfig::test();
  // Standard deviation of freshly created context codes.
  double code_sigma = 0.01;
  // Size of the first progressive stage.
  std::size_t first_stage = 1;
  // Print a progress line every this many epochs (the final epoch of a
  // stage is always printed).
  std::size_t log_every = 1;
  // Recorded in every checkpoint the run writes.
  std::string config_hash;

  void validate() const;
  std::size_t epochs_for(std::size_t stage) const;
};

struct ProgressiveSchedule {
  std::vector<std::size_t> sizes;
};

// min(10^i, n) for i = 0, 1, ... deduplicated and ending at n. A first stage
// larger than one replaces the leading powers of ten below it.
ProgressiveSchedule progressive_schedule(std::size_t n, std::size_t first = 1);

// Mean over all elements of the squared difference.
double reconstruction_loss(const Tensor& pred, const Tensor& target);
NodeId reconstruction_loss(Graph& graph, NodeId pred, NodeId target);

// KL(N(mu, sigma) || N(0, 1)) averaged over dimensions, with mu and sigma the
// per-dimension empirical (population) moments of the rows of `codes`.
// Needs at least two rows.
double gaussian_kl(const Tensor& codes);
NodeId gaussian_kl(Graph& graph, NodeId codes);

// Precomputed field inputs for every pixel of a grid.
struct PixelFeatures {
  VideoDims dims;
  Tensor features;  // pixels x 6L

  PixelFeatures(VideoDims dims, std::size_t num_bands);
  Tensor rows(std::span<const std::size_t> pixels) const;
};

// RGB targets of the given pixels as a pixels x 3 tensor.
Tensor pixel_targets(const VideoTensor& video, std::span<const std::size_t> pixels);

struct SingleInrConfig {
  FieldArch arch = ModelConfig::test().field;
  // One step is a full pass over the pixels in shuffled minibatches.
  std::size_t steps = 750;
  double lr = 1e-4;
  std::size_t pixel_batch = 1024;
  std::uint64_t seed = 0;
  std::size_t log_every = 50;
};

struct SingleInrResult {
  Tensor theta;
  std::vector<double> step_mse;
};

SingleInrResult fit_single_inr(const VideoTensor& video, const SingleInrConfig& config, std::ostream* log = nullptr);

// Single-video objective of a standalone field over the given pixels.
double single_inr_loss(const Tensor& theta, const ThetaLayout& layout, const VideoTensor& video,
                       std::span<const std::size_t> pixels);

struct LossParts {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

// Multi-video objective for codebook entries `indices` (videos[k] belongs to
// entry indices[k]) over the given pixels of every video, with the KL term
// when the mode asks for it and at least two codes are present.
LossParts batch_loss(const Model& model, std::span<const VideoTensor> videos, std::span<const std::size_t> indices,
                     std::span<const std::size_t> pixels, double kl_weight);

struct StageReport {
  std::size_t stage = 0;
  std::size_t size = 0;
  std::size_t epochs = 0;
  double entry_mse = 0.0;
  double final_mse = 0.0;
  std::vector<double> epoch_mse;
  bool reached_threshold = false;
};

struct TrainHooks {
  std::ostream* log = nullptr;
  // Called after every stage with the updated model.
  std::function<void(const Model&, const StageReport&)> on_stage_end;
  // Called before every stage, once the codebook covers the stage.
  std::function<void(const Model&, std::size_t stage)> on_stage_begin;
};

// Optimizes the shared weights and the codes of entries [0, slice) jointly on
// videos[0, slice). Codes outside the slice are never touched. Returns after
// the entry evaluation when it already meets the threshold (except on the
// last stage), otherwise after the threshold is met or the epoch cap is hit.
StageReport train_stage(Model& model, std::span<const VideoTensor> videos, std::size_t slice, std::size_t stage,
                        bool last_stage, const TrainConfig& config, const TrainHooks& hooks = {});

// Full progressive run. `semantic` overrides the semantic codes (one per
// video); otherwise they come from the model's frozen encoder.
Model train(std::span<const VideoTensor> videos, const TrainConfig& config, const TrainHooks& hooks = {},
            const std::optional<std::vector<Tensor>>& semantic = std::nullopt);

struct GradCheckReport {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t checked = 0;
  std::size_t redrawn = 0;
  std::string worst;
};

// Compares backward() of the full multi-video objective (loss -> theta ->
// heads, fusion, context codes, no KL term) against fourth-order central differences on
// randomly drawn entries of every learnable tensor. Test profile, two random
// 2 x 4 x 4 videos. Entries whose stencil crosses a ReLU kink are redrawn, and
// the whole base point is redrawn when one entry keeps crossing.
GradCheckReport gradcheck(std::uint64_t seed, std::size_t samples_per_tensor = 8);

}  // namespace inrv

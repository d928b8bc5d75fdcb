#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "inrv/adam.hpp"
#include "inrv/errors.hpp"
#include "inrv/rng.hpp"
#include "inrv/trainer.hpp"
#include "objective.hpp"

namespace inrv {

namespace {

constexpr std::uint64_t kCodeStream = 7;
constexpr std::uint64_t kEpochStream = 8;

void shuffle(std::vector<std::size_t>& v, Philox& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

void log_epoch(std::ostream* log, std::size_t stage, std::size_t epoch, double mse, double kl) {
  if (!log) return;
  char buf[128];
  std::snprintf(buf, sizeof buf, "stage=%zu epoch=%zu mse=%.6g kl=%.6g\n", stage + 1, epoch, mse, kl);
  *log << buf << std::flush;
}

// State shared by all steps of one stage.
class StageRunner {
 public:
  StageRunner(Model& model, std::span<const VideoTensor> videos, std::size_t slice, std::size_t stage,
              const TrainConfig& config)
      : model_(model),
        videos_(videos),
        slice_(slice),
        stage_(stage),
        config_(config),
        features_(videos.front().dims(), model.config.field.num_bands),
        adam_{config.lr} {
    for (std::size_t n = 0; n < slice; ++n) code_states_.push_back(AdamState::like(model.codebook.context(n)));
  }

  // Mean per-pixel MSE over the slice without touching any weight.
  double evaluate() const {
    const std::size_t total = features_.dims.pixels();
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> order(slice_);
    std::iota(order.begin(), order.end(), 0);
    double sum = 0.0;
    for (std::size_t vs = 0; vs < slice_; vs += config_.video_batch) {
      const std::span<const std::size_t> idx(order.data() + vs, std::min(config_.video_batch, slice_ - vs));
      for (std::size_t start = 0; start < total; start += config_.pixel_batch) {
        const std::span<const std::size_t> pixels(all.data() + start, std::min(config_.pixel_batch, total - start));
        auto o = build(idx, pixels, false);
        sum += o.graph.evaluate(o.reconstruction)[0] * static_cast<double>(pixels.size() * idx.size());
      }
    }
    return sum / static_cast<double>(total * slice_);
  }

  // One pass over every pixel of every video in the slice. Returns the
  // pixel-weighted mean reconstruction loss and mean KL of the steps.
  std::pair<double, double> epoch(std::size_t epoch_index) {
    Philox rng = Philox(config_.seed).split(kEpochStream + stage_).split(epoch_index);
    std::vector<std::size_t> order(slice_);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const std::size_t total = features_.dims.pixels();
    std::vector<std::size_t> pixels_order(total);

    double mse_sum = 0.0, kl_sum = 0.0, weight = 0.0;
    std::size_t kl_steps = 0;
    for (std::size_t vs = 0; vs < slice_; vs += config_.video_batch) {
      const std::span<const std::size_t> idx(order.data() + vs, std::min(config_.video_batch, slice_ - vs));
      std::iota(pixels_order.begin(), pixels_order.end(), 0);
      shuffle(pixels_order, rng);
      for (std::size_t start = 0; start < total; start += config_.pixel_batch) {
        const std::span<const std::size_t> pixels(pixels_order.data() + start,
                                                  std::min(config_.pixel_batch, total - start));
        const auto [mse, kl] = step(idx, pixels, epoch_index);
        const double w = static_cast<double>(pixels.size() * idx.size());
        mse_sum += mse * w;
        weight += w;
        if (kl) {
          kl_sum += *kl;
          ++kl_steps;
        }
      }
    }
    return {mse_sum / weight, kl_steps ? kl_sum / static_cast<double>(kl_steps) : 0.0};
  }

 private:
  detail::Objective build(std::span<const std::size_t> idx, std::span<const std::size_t> pixels,
                          bool requires_grad) const {
    std::vector<Tensor> targets;
    targets.reserve(idx.size());
    for (std::size_t n : idx) targets.push_back(pixel_targets(videos_[n], pixels));
    return detail::build_objective(model_, idx, features_.rows(pixels), targets, config_.kl_weight, requires_grad);
  }

  std::pair<double, std::optional<double>> step(std::span<const std::size_t> idx, std::span<const std::size_t> pixels,
                                                std::size_t epoch_index) {
    auto o = build(idx, pixels, true);
    const double total = o.graph.evaluate(o.total)[0];
    if (!std::isfinite(total)) {
      throw NumericError("training diverged in stage " + std::to_string(stage_ + 1) + " epoch " +
                         std::to_string(epoch_index) + ": loss is " + std::to_string(total));
    }
    const Gradients grads = o.graph.backward(o.total);
    const auto leaves = detail::weight_leaves(o.nodes, model_.weights);
    if (weight_states_.empty()) {
      for (const auto& [id, tensor] : leaves) weight_states_.push_back(AdamState::like(*tensor));
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      adam_step(*leaves[i].second, grads.at(leaves[i].first), weight_states_[i], adam_);
    }
    const Tensor& code_grad = grads.at(o.codes);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto row = code_grad.row(b);
      const Tensor g({row.size()}, std::vector<double>(row.begin(), row.end()));
      adam_step(model_.codebook.context(idx[b]), g, code_states_[idx[b]], adam_);
    }
    std::optional<double> kl;
    if (o.kl) kl = o.graph.value(*o.kl)[0];
    return {o.graph.value(o.reconstruction)[0], kl};
  }

  Model& model_;
  std::span<const VideoTensor> videos_;
  std::size_t slice_;
  std::size_t stage_;
  const TrainConfig& config_;
  PixelFeatures features_;
  AdamConfig adam_;
  std::vector<AdamState> weight_states_;
  std::vector<AdamState> code_states_;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw UsageError("lr must be positive");
  if (!(threshold > 0.0)) throw UsageError("threshold must be positive");
  if (!(kl_weight >= 0.0)) throw UsageError("kl_weight must be non-negative");
  if (max_epochs.empty()) throw UsageError("max_epochs needs at least one entry");
  if (pixel_batch == 0) throw UsageError("pixel_batch must be positive");
  if (video_batch == 0) throw UsageError("video_batch must be positive");
  if (first_stage == 0) throw UsageError("first_stage must be positive");
  if (!(code_sigma >= 0.0)) throw UsageError("code_sigma must be non-negative");
}

std::size_t TrainConfig::epochs_for(std::size_t stage) const {
  return max_epochs.at(std::min(stage, max_epochs.size() - 1));
}

ProgressiveSchedule progressive_schedule(std::size_t n, std::size_t first) {
  if (n == 0) throw UsageError("progressive schedule needs at least one video");
  if (first == 0) throw UsageError("first stage size must be positive");
  ProgressiveSchedule s;
  s.sizes.push_back(std::min(first, n));
  for (std::size_t p = 10; s.sizes.back() < n; p *= 10) {
    const std::size_t size = std::min(p, n);
    if (size > s.sizes.back()) s.sizes.push_back(size);
  }
  return s;
}

StageReport train_stage(Model& model, std::span<const VideoTensor> videos, std::size_t slice, std::size_t stage,
                        bool last_stage, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (slice == 0 || slice > videos.size()) {
    throw UsageError("stage slice of " + std::to_string(slice) + " videos out of " + std::to_string(videos.size()));
  }
  if (model.codebook.size() < slice) {
    throw UsageError("codebook has " + std::to_string(model.codebook.size()) + " codes, stage needs " +
                     std::to_string(slice));
  }
  StageRunner runner(model, videos, slice, stage, config);
  StageReport report;
  report.stage = stage;
  report.size = slice;
  report.entry_mse = runner.evaluate();
  report.final_mse = report.entry_mse;
  log_epoch(hooks.log, stage, 0, report.entry_mse, 0.0);
  if (!last_stage && report.entry_mse <= config.threshold) {
    report.reached_threshold = true;
    return report;
  }
  const std::size_t cap = config.epochs_for(stage);
  for (std::size_t e = 1; e <= cap; ++e) {
    const auto [mse, kl] = runner.epoch(e);
    report.epoch_mse.push_back(mse);
    report.epochs = e;
    report.final_mse = mse;
    const bool done = !last_stage && mse <= config.threshold;
    if (done || e == cap || (config.log_every > 0 && e % config.log_every == 0)) log_epoch(hooks.log, stage, e, mse, kl);
    if (done) {
      report.reached_threshold = true;
      break;
    }
  }
  return report;
}

Model train(std::span<const VideoTensor> videos, const TrainConfig& config, const TrainHooks& hooks,
            const std::optional<std::vector<Tensor>>& semantic) {
  config.validate();
  if (videos.empty()) throw UsageError("training needs at least one video");
  const VideoDims dims = videos.front().dims();
  for (std::size_t n = 1; n < videos.size(); ++n) {
    if (!(videos[n].dims() == dims)) throw ShapeError("video " + std::to_string(n) + " differs in size from video 0");
  }

  Model model = Model::create(config.model, config.seed, config.regularization);
  const ProgressiveSchedule schedule = progressive_schedule(videos.size(), config.first_stage);
  model.meta.profile = config.profile;
  model.meta.train_dims = dims;
  model.meta.num_stages = schedule.sizes.size();
  model.meta.config_hash = config.config_hash;

  std::vector<Tensor> codes(videos.size(), Tensor({config.model.semantic_dim}));
  if (semantic) {
    if (semantic->size() != videos.size()) {
      throw UsageError(std::to_string(semantic->size()) + " semantic codes for " + std::to_string(videos.size()) +
                       " videos");
    }
    for (std::size_t n = 0; n < videos.size(); ++n) {
      if ((*semantic)[n].size() != config.model.semantic_dim) {
        throw ShapeError("semantic code " + std::to_string(n) + " has " + std::to_string((*semantic)[n].size()) +
                         " values, expected " + std::to_string(config.model.semantic_dim));
      }
      codes[n] = (*semantic)[n].reshaped({config.model.semantic_dim});
    }
  } else if (model.semantic_enabled()) {
    const auto count = static_cast<std::ptrdiff_t>(videos.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t n = 0; n < count; ++n) codes[n] = model.encoder.encode(videos[n]);
  }

  const std::uint64_t code_seed = Philox(config.seed).split(kCodeStream).next_u64();
  for (std::size_t l = 0; l < schedule.sizes.size(); ++l) {
    const std::size_t size = schedule.sizes[l];
    const std::vector<Tensor> added(codes.begin() + static_cast<std::ptrdiff_t>(model.codebook.size()),
                                    codes.begin() + static_cast<std::ptrdiff_t>(size));
    model.codebook = codebook_extend(model.codebook, size, added, code_seed, config.code_sigma);
    const bool last = l + 1 == schedule.sizes.size();
    if (hooks.on_stage_begin) hooks.on_stage_begin(model, l);
    const StageReport report = train_stage(model, videos, size, l, last, config, hooks);
    model.meta.stage = l + 1;
    if (hooks.on_stage_end) hooks.on_stage_end(model, report);
  }
  return model;
}

}  // namespace inrv

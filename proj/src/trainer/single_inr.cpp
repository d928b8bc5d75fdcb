#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "inrv/adam.hpp"
#include "inrv/errors.hpp"
#include "inrv/rng.hpp"
#include "inrv/trainer.hpp"

namespace inrv {

SingleInrResult fit_single_inr(const VideoTensor& video, const SingleInrConfig& config, std::ostream* log) {
  if (config.lr <= 0.0) throw UsageError("single-INR learning rate must be positive");
  if (config.pixel_batch == 0) throw UsageError("single-INR pixel batch must be positive");
  const ThetaLayout layout(config.arch);
  const PixelFeatures features(video.dims(), config.arch.num_bands);
  const std::size_t total = video.num_pixels();
  const AdamConfig adam{config.lr};

  Philox root(config.seed);
  SingleInrResult result;
  result.theta = init_theta(layout, root.split(0).next_u64());
  AdamState state = AdamState::like(result.theta);
  std::vector<std::size_t> order(total);

  for (std::size_t step = 0; step < config.steps; ++step) {
    Philox rng = root.split(1).split(step);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = total; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < total; start += config.pixel_batch) {
      const std::span<const std::size_t> pixels(order.data() + start, std::min(config.pixel_batch, total - start));
      Graph g;
      const NodeId theta = g.leaf(Tensor(result.theta).set_requires_grad(true), "theta");
      const NodeId pred = build_field(g, theta, g.leaf(features.rows(pixels), "features"), layout);
      const NodeId loss = reconstruction_loss(g, pred, g.leaf(pixel_targets(video, pixels), "target"));
      const double value = g.evaluate(loss)[0];
      if (!std::isfinite(value)) {
        throw NumericError("single-INR fit diverged at step " + std::to_string(step) + " (loss " +
                           std::to_string(value) + ")");
      }
      adam_step(result.theta, g.backward(loss).at(theta), state, adam);
      sum += value;
      ++batches;
    }
    result.step_mse.push_back(sum / static_cast<double>(batches));
    if (log && config.log_every > 0 && ((step + 1) % config.log_every == 0 || step + 1 == config.steps)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step=%zu mse=%.6g\n", step + 1, result.step_mse.back());
      *log << buf << std::flush;
    }
  }
  return result;
}

}  // namespace inrv

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "inrv/video.hpp"

namespace inrv {

// Every metric reads [0, 1] volumes and reports on the [0, 255] scale.
inline constexpr double kPixelScale = 255.0;
inline constexpr double kPsnrCap = 100.0;

double psnr(const VideoTensor& a, const VideoTensor& b);

// Mean over frames and channels of the per-frame SSIM map averaged over all
// valid 11x11 window positions (Gaussian weights, sigma 1.5).
double ssim(const VideoTensor& a, const VideoTensor& b);

// Per-pixel mean squared error of one pair on the [0, 255] scale.
double mse255(const VideoTensor& a, const VideoTensor& b);

// Root of the mean over pairs of the per-pair MSE.
double error_e(std::span<const VideoTensor> reconstructions, std::span<const VideoTensor> truths);

// Mean absolute difference over the given flat pixel indices (all three
// channels of each).
double context_l1(const VideoTensor& pred, const VideoTensor& truth, std::span<const std::size_t> pixels);

struct MetricReport {
  enum class Aggregate { Mean, RootMeanSquare };

  std::string metric;
  std::vector<double> values;
  Aggregate aggregate = Aggregate::Mean;
  double total = 0.0;
  std::string range = "[0,255]";

  double recompute() const;
  std::string to_csv(const std::vector<std::string>& labels = {}) const;
  std::string to_text() const;
};

// metric is one of psnr, ssim, e, l1. For e the per-video values are RMSE
// and the aggregate is their root mean square.
MetricReport evaluate_metric(const std::string& metric, std::span<const VideoTensor> predictions,
                             std::span<const VideoTensor> truths);

}  // namespace inrv

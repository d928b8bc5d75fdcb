#include "inrv/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "inrv/errors.hpp"

namespace inrv {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = (0.01 * kPixelScale) * (0.01 * kPixelScale);
constexpr double kC2 = (0.03 * kPixelScale) * (0.03 * kPixelScale);

void require_same_dims(const VideoTensor& a, const VideoTensor& b, const char* metric) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError(std::string(metric) + ": videos differ in size (" + std::to_string(a.frames()) + "x" +
                     std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                     std::to_string(b.frames()) + "x" + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  const double mid = (kWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - mid;
    taps[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable valid-mode filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t H, std::size_t W,
                                 const std::array<double, kWindow>& taps) {
  const std::size_t oh = H - kWindow + 1, ow = W - kWindow + 1;
  std::vector<double> rows(H * ow);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < ow; ++w) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += taps[k] * plane[h * W + w + k];
      rows[h * ow + w] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t h = 0; h < oh; ++h) {
    for (std::size_t w = 0; w < ow; ++w) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += taps[k] * rows[(h + k) * ow + w];
      out[h * ow + w] = s;
    }
  }
  return out;
}

double plane_ssim(const VideoTensor& a, const VideoTensor& b, std::size_t t, std::size_t c,
                  const std::array<double, kWindow>& taps) {
  const std::size_t H = a.height(), W = a.width();
  std::vector<double> x(H * W), y(H * W), xx(H * W), yy(H * W), xy(H * W);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      const std::size_t i = h * W + w;
      x[i] = a.at(t, h, w, c) * kPixelScale;
      y[i] = b.at(t, h, w, c) * kPixelScale;
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
  }
  const auto mx = filter_valid(x, H, W, taps), my = filter_valid(y, H, W, taps);
  const auto sxx = filter_valid(xx, H, W, taps), syy = filter_valid(yy, H, W, taps);
  const auto sxy = filter_valid(xy, H, W, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double mse255(const VideoTensor& a, const VideoTensor& b) {
  require_same_dims(a, b, "mse");
  const auto da = a.data(), db = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = (da[i] - db[i]) * kPixelScale;
    sum += d * d;
  }
  return sum / static_cast<double>(da.size());
}

double psnr(const VideoTensor& a, const VideoTensor& b) {
  require_same_dims(a, b, "psnr");
  const double mse = mse255(a, b);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(kPixelScale * kPixelScale / mse));
}

double ssim(const VideoTensor& a, const VideoTensor& b) {
  require_same_dims(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow) {
    throw ShapeError("ssim: frames of " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " are smaller than the 11x11 window");
  }
  const auto taps = gaussian_taps();
  double total = 0.0;
  for (std::size_t t = 0; t < a.frames(); ++t) {
    for (std::size_t c = 0; c < VideoTensor::kChannels; ++c) total += plane_ssim(a, b, t, c, taps);
  }
  return total / static_cast<double>(a.frames() * VideoTensor::kChannels);
}

double error_e(std::span<const VideoTensor> reconstructions, std::span<const VideoTensor> truths) {
  if (reconstructions.empty()) throw UsageError("error E needs at least one video pair");
  if (reconstructions.size() != truths.size()) {
    throw UsageError("error E: " + std::to_string(reconstructions.size()) + " reconstructions for " +
                     std::to_string(truths.size()) + " videos");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < truths.size(); ++n) sum += mse255(reconstructions[n], truths[n]);
  return std::sqrt(sum / static_cast<double>(truths.size()));
}

double context_l1(const VideoTensor& pred, const VideoTensor& truth, std::span<const std::size_t> pixels) {
  require_same_dims(pred, truth, "context-l1");
  if (pixels.empty()) throw UsageError("context-l1 needs a non-empty mask");
  double sum = 0.0;
  for (std::size_t p : pixels) {
    if (p >= pred.num_pixels()) {
      throw UsageError("context-l1: pixel " + std::to_string(p) + " outside a video of " +
                       std::to_string(pred.num_pixels()) + " pixels");
    }
    const auto x = pred.pixel(p), y = truth.pixel(p);
    for (std::size_t c = 0; c < VideoTensor::kChannels; ++c) sum += std::abs(x[c] - y[c]) * kPixelScale;
  }
  return sum / static_cast<double>(pixels.size() * VideoTensor::kChannels);
}

double MetricReport::recompute() const {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += aggregate == Aggregate::Mean ? v : v * v;
  const double mean = sum / static_cast<double>(values.size());
  return aggregate == Aggregate::Mean ? mean : std::sqrt(mean);
}

std::string MetricReport::to_csv(const std::vector<std::string>& labels) const {
  char buf[64];
  std::string out = "video," + metric + "\n";
  for (std::size_t n = 0; n < values.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", values[n]);
    out += (n < labels.size() ? labels[n] : std::to_string(n)) + "," + buf + "\n";
  }
  std::snprintf(buf, sizeof buf, "%.17g", total);
  out += std::string(aggregate == Aggregate::Mean ? "mean" : "rms") + "," + buf + "\n";
  return out;
}

std::string MetricReport::to_text() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s over %zu videos: %.4f (%s, pixel range %s)", metric.c_str(), values.size(),
                total, aggregate == Aggregate::Mean ? "mean" : "root mean square", range.c_str());
  return buf;
}

MetricReport evaluate_metric(const std::string& metric, std::span<const VideoTensor> predictions,
                             std::span<const VideoTensor> truths) {
  if (predictions.size() != truths.size() || truths.empty()) {
    throw UsageError("metric '" + metric + "' needs equally many (>= 1) predictions and references");
  }
  for (std::size_t i = 0; i < truths.size(); ++i) {
    require_same_dims(predictions[i], truths[i], metric.c_str());
    if (metric == "ssim" && (truths[i].height() < kWindow || truths[i].width() < kWindow)) ssim(truths[i], truths[i]);
  }
  MetricReport report;
  report.metric = metric;
  report.values.resize(truths.size());
  const auto n = static_cast<std::ptrdiff_t>(truths.size());
  if (metric == "psnr") {
    report.range = "[0,255], cap 100 dB";
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) report.values[i] = psnr(predictions[i], truths[i]);
  } else if (metric == "ssim") {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) report.values[i] = ssim(predictions[i], truths[i]);
  } else if (metric == "e") {
    report.aggregate = MetricReport::Aggregate::RootMeanSquare;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) report.values[i] = std::sqrt(mse255(predictions[i], truths[i]));
  } else if (metric == "l1") {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      std::vector<std::size_t> all(truths[i].num_pixels());
      for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
      report.values[i] = context_l1(predictions[i], truths[i], all);
    }
  } else {
    throw UsageError("unknown metric '" + metric + "' (expected psnr, ssim, e or l1)");
  }
  report.total = report.recompute();
  return report;
}

}  // namespace inrv

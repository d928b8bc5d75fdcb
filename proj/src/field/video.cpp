#include "inrv/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inrv/errors.hpp"

namespace inrv {

namespace {

void check_dims(const VideoDims& d) {
  if (d.frames == 0 || d.height == 0 || d.width == 0) {
    throw ShapeError("video dimensions must be positive, got " + std::to_string(d.frames) + "x" +
                     std::to_string(d.height) + "x" + std::to_string(d.width));
  }
}

}  // namespace

VideoTensor::VideoTensor(VideoDims dims) : dims_(dims) {
  check_dims(dims_);
  pixels_.assign(dims_.pixels() * kChannels, 0.0);
}

VideoTensor::VideoTensor(VideoDims dims, std::vector<double> pixels) : dims_(dims), pixels_(std::move(pixels)) {
  check_dims(dims_);
  if (pixels_.size() != dims_.pixels() * kChannels) {
    throw ShapeError("video payload has " + std::to_string(pixels_.size()) + " values, expected " +
                     std::to_string(dims_.pixels() * kChannels));
  }
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw NumericError("video pixel value " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

void VideoTensor::set(std::size_t t, std::size_t h, std::size_t w, std::size_t c, double value) {
  if (!std::isfinite(value)) throw NumericError("non-finite pixel value");
  pixels_[index(t, h, w) * kChannels + c] = std::clamp(value, 0.0, 1.0);
}

}  // namespace inrv

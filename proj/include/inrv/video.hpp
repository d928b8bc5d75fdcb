#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace inrv {

struct VideoDims {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return frames * height * width; }
  friend bool operator==(const VideoDims&, const VideoDims&) = default;
};

// T x H x W x 3 RGB volume with every value finite and in [0, 1].
class VideoTensor {
 public:
  static constexpr std::size_t kChannels = 3;

  VideoTensor() = default;
  // Black video of the given size.
  explicit VideoTensor(VideoDims dims);
  // Validates range and length; throws ShapeError / NumericError.
  VideoTensor(VideoDims dims, std::vector<double> pixels);

  const VideoDims& dims() const { return dims_; }
  std::size_t frames() const { return dims_.frames; }
  std::size_t height() const { return dims_.height; }
  std::size_t width() const { return dims_.width; }
  std::size_t num_pixels() const { return dims_.pixels(); }

  std::span<const double> data() const { return pixels_; }

  std::size_t index(std::size_t t, std::size_t h, std::size_t w) const {
    return ((t * dims_.height + h) * dims_.width + w);
  }
  double at(std::size_t t, std::size_t h, std::size_t w, std::size_t c) const {
    return pixels_[index(t, h, w) * kChannels + c];
  }
  // Writes are clamped into [0, 1].
  void set(std::size_t t, std::size_t h, std::size_t w, std::size_t c, double value);

  // RGB triple of the pixel with flat index `pixel` (t-major, then h, then w).
  std::span<const double> pixel(std::size_t pixel) const {
    return std::span<const double>(pixels_).subspan(pixel * kChannels, kChannels);
  }

  friend bool operator==(const VideoTensor&, const VideoTensor&) = default;

 private:
  VideoDims dims_;
  std::vector<double> pixels_;
};

}  // namespace inrv

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "inrv/tensor.hpp"

namespace inrv {

// Philox4x32-10 counter-based generator (Salmon et al., Random123). A
// generator is identified by (seed, stream); split() derives independent
// child streams, so results never depend on how many numbers some other
// component consumed. Distributions are implemented here rather than taken
// from <random>, whose distributions are not portable across standard
// libraries.
class Philox {
 public:
  static constexpr std::string_view kName = "philox4x32-10";

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  // Raw block function: 128 random bits for the given (counter, stream).
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

  Philox split(std::uint64_t child) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller (one output per pair of uniforms).
  double normal();
  // Uniform integer in [0, n), rejection-sampled. n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int available_ = 0;
};

// Weight-initialization schemes. UniformFanIn draws from U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)); fan_in defaults to the leading extent of the shape.
struct InitScheme {
  enum class Kind { UniformFanIn, Gaussian };
  Kind kind = Kind::UniformFanIn;
  double sigma = 1.0;
  std::size_t fan_in = 0;

  static InitScheme uniform_fan_in(std::size_t fan_in = 0) { return {Kind::UniformFanIn, 1.0, fan_in}; }
  static InitScheme gaussian(double sigma) { return {Kind::Gaussian, sigma, 0}; }

  // Accepts "uniform-fan-in" or "gaussian(<sigma>)"; throws UsageError otherwise.
  static InitScheme parse(std::string_view text);
};

Tensor seeded_init(const Shape& shape, const InitScheme& scheme, std::uint64_t seed);

// SplitMix64 finalizer, used to derive seeds and stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace inrv

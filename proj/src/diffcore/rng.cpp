#include "inrv/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "inrv/errors.hpp"

namespace inrv {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

Philox::Philox(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

Philox Philox::split(std::uint64_t child) const { return Philox(seed_, mix64(stream_ ^ mix64(child + 1))); }

void Philox::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = block(ctr, key);
  ++counter_;
  available_ = 4;
}

std::uint32_t Philox::next_u32() {
  if (available_ == 0) refill();
  return buffer_[4 - available_--];
}

std::uint64_t Philox::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Philox::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Philox::normal() {
  // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Philox::below(std::uint64_t n) {
  if (n == 0) throw UsageError("Philox::below requires a positive bound");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

InitScheme InitScheme::parse(std::string_view text) {
  if (text == "uniform-fan-in") return uniform_fan_in();
  constexpr std::string_view prefix = "gaussian(";
  if (text.starts_with(prefix) && text.ends_with(")")) {
    const std::string inner(text.substr(prefix.size(), text.size() - prefix.size() - 1));
    try {
      std::size_t used = 0;
      const double sigma = std::stod(inner, &used);
      if (used == inner.size() && sigma >= 0.0) return gaussian(sigma);
    } catch (const std::exception&) {
    }
  }
  throw UsageError("unknown init scheme '" + std::string(text) + "'");
}

Tensor seeded_init(const Shape& shape, const InitScheme& scheme, std::uint64_t seed) {
  Tensor out(shape);
  Philox rng(seed);
  auto data = out.data();
  switch (scheme.kind) {
    case InitScheme::Kind::UniformFanIn: {
      const std::size_t fan_in = scheme.fan_in ? scheme.fan_in : shape.at(0);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : data) v = (2.0 * rng.uniform() - 1.0) * bound;
      break;
    }
    case InitScheme::Kind::Gaussian:
      if (scheme.sigma < 0.0) throw UsageError("gaussian init requires sigma >= 0");
      for (auto& v : data) v = scheme.sigma * rng.normal();
      break;
    default:
      throw UsageError("unknown init scheme");
  }
  return out;
}

}  // namespace inrv

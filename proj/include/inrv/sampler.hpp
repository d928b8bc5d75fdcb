#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inrv/model.hpp"
#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv {

// Spherical interpolation between two nonzero vectors, falling back to linear
// interpolation when the angle is under 1e-6 rad. t = 0 and t = 1 return the
// endpoints exactly.
Tensor slerp(const Tensor& a, const Tensor& b, double t);

// Renders the instance codes along the slerp path from entry i to entry j at
// t = k / (steps - 1).
std::vector<VideoTensor> interpolate_videos(const Model& model, std::size_t i, std::size_t j, std::size_t steps,
                                            VideoDims dims);

enum class SampleMode { SlerpPairs, GaussianFit };

SampleMode parse_sample_mode(const std::string& text);
std::string to_string(SampleMode mode);

struct GaussianFit {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation
};

GaussianFit fit_gaussian(const std::vector<Tensor>& codes);

struct SampledLatent {
  Tensor latent;
  // Provenance of slerp-pairs samples.
  std::size_t i = 0;
  std::size_t j = 0;
  double t = 0.0;
};

struct LatentSamples {
  SampleMode mode = SampleMode::SlerpPairs;
  std::vector<SampledLatent> samples;
  GaussianFit fit;  // filled in gaussian-fit mode

  // One line per sample: "sample=<k> i=<i> j=<j> t=<t>" or "sample=<k> gaussian".
  std::string log() const;
};

LatentSamples sample_latents(const Model& model, SampleMode mode, std::size_t count, std::uint64_t seed);

// CSV with header "index,m0,...,m<D-1>" and one row per code at full precision.
void write_latents_csv(const std::filesystem::path& path, const std::vector<Tensor>& codes, std::size_t dim);
std::vector<Tensor> read_latents_csv(const std::filesystem::path& path);
void export_latents(const Model& model, const std::filesystem::path& path);

}  // namespace inrv

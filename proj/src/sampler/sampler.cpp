#include "inrv/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

namespace {

constexpr double kParallelAngle = 1e-6;

double norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Tensor slerp(const Tensor& a, const Tensor& b, double t) {
  if (a.size() != b.size()) {
    throw ShapeError("slerp between vectors of " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " values");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw UsageError("slerp parameter must lie in [0, 1], got " + std::to_string(t));
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw UsageError("slerp needs nonzero vectors");
  if (t == 0.0) return a;
  if (t == 1.0) return b;

  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double omega = std::acos(std::clamp(dot / (na * nb), -1.0, 1.0));
  double wa = 1.0 - t, wb = t;
  if (omega >= kParallelAngle) {
    const double s = std::sin(omega);
    wa = std::sin((1.0 - t) * omega) / s;
    wb = std::sin(t * omega) / s;
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

std::vector<VideoTensor> interpolate_videos(const Model& model, std::size_t i, std::size_t j, std::size_t steps,
                                            VideoDims dims) {
  if (steps < 2) throw UsageError("interpolation needs at least 2 steps, got " + std::to_string(steps));
  const Tensor a = model.instance_code(i);
  const Tensor b = model.instance_code(j);
  std::vector<VideoTensor> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
    out.push_back(model.render(slerp(a, b, t), dims));
  }
  return out;
}

SampleMode parse_sample_mode(const std::string& text) {
  if (text == "slerp-pairs") return SampleMode::SlerpPairs;
  if (text == "gaussian-fit") return SampleMode::GaussianFit;
  throw UsageError("unknown sampling mode '" + text + "' (expected slerp-pairs or gaussian-fit)");
}

std::string to_string(SampleMode mode) { return mode == SampleMode::SlerpPairs ? "slerp-pairs" : "gaussian-fit"; }

GaussianFit fit_gaussian(const std::vector<Tensor>& codes) {
  if (codes.size() < 2) throw UsageError("a gaussian fit needs at least 2 codes, got " + std::to_string(codes.size()));
  const std::size_t dim = codes.front().size();
  GaussianFit fit{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  const double n = static_cast<double>(codes.size());
  for (const auto& c : codes) {
    if (c.size() != dim) throw ShapeError("codes of different lengths in one fit");
    for (std::size_t d = 0; d < dim; ++d) fit.mean[d] += c[d];
  }
  for (auto& m : fit.mean) m /= n;
  for (const auto& c : codes)
    for (std::size_t d = 0; d < dim; ++d) fit.stddev[d] += (c[d] - fit.mean[d]) * (c[d] - fit.mean[d]);
  for (auto& s : fit.stddev) s = std::sqrt(s / n);
  return fit;
}

std::string LatentSamples::log() const {
  std::ostringstream out;
  char buf[128];
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (mode == SampleMode::SlerpPairs) {
      std::snprintf(buf, sizeof buf, "sample=%zu i=%zu j=%zu t=%.17g\n", k, samples[k].i, samples[k].j, samples[k].t);
    } else {
      std::snprintf(buf, sizeof buf, "sample=%zu gaussian\n", k);
    }
    out << buf;
  }
  return out.str();
}

LatentSamples sample_latents(const Model& model, SampleMode mode, std::size_t count, std::uint64_t seed) {
  const std::size_t n = model.codebook.size();
  if (n < 2) throw UsageError("sampling needs a codebook of at least 2 videos, got " + std::to_string(n));
  const std::vector<Tensor> codes = model.instance_codes();
  LatentSamples out;
  out.mode = mode;
  out.samples.resize(count);
  if (mode == SampleMode::GaussianFit) out.fit = fit_gaussian(codes);

  const Philox root(seed);
  // Each sample draws from its own stream, so samples can be made in parallel.
  const auto total = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    Philox rng = root.split(static_cast<std::uint64_t>(k));
    SampledLatent& s = out.samples[static_cast<std::size_t>(k)];
    if (mode == SampleMode::SlerpPairs) {
      s.i = rng.below(n);
      s.j = rng.below(n - 1);
      if (s.j >= s.i) ++s.j;
      do s.t = rng.uniform(); while (s.t == 0.0);
      s.latent = slerp(codes[s.i], codes[s.j], s.t);
    } else {
      s.latent = Tensor({model.config.instance_dim});
      for (std::size_t d = 0; d < s.latent.size(); ++d) s.latent[d] = out.fit.mean[d] + out.fit.stddev[d] * rng.normal();
    }
  }
  return out;
}

void write_latents_csv(const std::filesystem::path& path, const std::vector<Tensor>& codes, std::size_t dim) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << "index";
  for (std::size_t d = 0; d < dim; ++d) out << ",m" << d;
  out << '\n';
  char buf[32];
  for (std::size_t n = 0; n < codes.size(); ++n) {
    if (codes[n].size() != dim) throw ShapeError("code " + std::to_string(n) + " has the wrong length");
    out << n;
    for (double v : codes[n].data()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("error while writing '" + path.string() + "'");
}

std::vector<Tensor> read_latents_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("index", 0) != 0) {
    throw FormatError(path.string() + ": missing 'index,m0,...' header");
  }
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<Tensor> codes;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    if (std::strtoull(cell.c_str(), nullptr, 10) != codes.size()) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has index " + cell);
    }
    Tensor code({dim});
    std::size_t d = 0;
    while (std::getline(fields, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (d >= dim || end == cell.c_str() || *end != '\0') {
        throw FormatError(path.string() + ": bad value '" + cell + "' in row " + std::to_string(row));
      }
      code[d++] = v;
    }
    if (d != dim) throw FormatError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(d) + " values");
    codes.push_back(std::move(code));
  }
  return codes;
}

void export_latents(const Model& model, const std::filesystem::path& path) {
  write_latents_csv(path, model.instance_codes(), model.config.instance_dim);
}

}  // namespace inrv

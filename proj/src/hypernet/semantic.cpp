#include "inrv/semantic.hpp"

#include <algorithm>
#include <cmath>

#include "inrv/errors.hpp"
#include "inrv/kernels.hpp"
#include "inrv/rng.hpp"

namespace inrv {

namespace {

// weights[i * n + p]: share of source pixel p in output cell i, for a 1-D
// area resample of n source pixels onto `cells` cells.
std::vector<double> area_weights(std::size_t n, std::size_t cells) {
  std::vector<double> w(cells * n, 0.0);
  const double step = static_cast<double>(n) / static_cast<double>(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double lo = step * static_cast<double>(i);
    const double hi = step * static_cast<double>(i + 1);
    for (std::size_t p = static_cast<std::size_t>(lo); p < n && static_cast<double>(p) < hi; ++p) {
      const double overlap = std::min(hi, static_cast<double>(p + 1)) - std::max(lo, static_cast<double>(p));
      if (overlap > 0.0) w[i * n + p] = overlap / step;
    }
  }
  return w;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Runs one GRU direction over a T x in sequence; returns T x H states.
Tensor run_direction(const SemanticEncoder::GruDirection& d, const Tensor& seq, bool reverse) {
  const std::size_t steps = seq.dim(0);
  const std::size_t in = seq.dim(1);
  const std::size_t hidden = d.w_hh.dim(0);
  const std::size_t gates = 3 * hidden;

  Tensor input_gates({steps, gates});
  kernels::matmul(seq.data(), d.w_ih.data(), input_gates.data(), steps, in, gates);

  Tensor out({steps, hidden});
  std::vector<double> h(hidden, 0.0);
  std::vector<double> hg(gates);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    kernels::matmul(h, d.w_hh.data(), hg, 1, hidden, gates);
    const auto gi = input_gates.row(t);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double r = sigmoid(gi[j] + d.b_ih[j] + hg[j] + d.b_hh[j]);
      const double z = sigmoid(gi[hidden + j] + d.b_ih[hidden + j] + hg[hidden + j] + d.b_hh[hidden + j]);
      const double n =
          std::tanh(gi[2 * hidden + j] + d.b_ih[2 * hidden + j] + r * (hg[2 * hidden + j] + d.b_hh[2 * hidden + j]));
      h[j] = (1.0 - z) * n + z * h[j];
    }
    std::copy(h.begin(), h.end(), out.row(t).begin());
  }
  return out;
}

}  // namespace

std::vector<double> frame_thumbnail(const VideoTensor& video, std::size_t frame) {
  const std::size_t H = video.height();
  const std::size_t W = video.width();
  const auto wy = area_weights(H, SemanticEncoder::kThumb);
  const auto wx = area_weights(W, SemanticEncoder::kThumb);
  std::vector<double> luma(H * W);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      luma[h * W + w] = 0.299 * video.at(frame, h, w, 0) + 0.587 * video.at(frame, h, w, 1) +
                        0.114 * video.at(frame, h, w, 2);
    }
  }
  constexpr std::size_t K = SemanticEncoder::kThumb;
  std::vector<double> rows(K * W);
  kernels::matmul(wy, luma, rows, K, H, W);
  std::vector<double> thumb(K * K);
  kernels::matmul_nt(rows, wx, thumb, K, W, K);
  return thumb;
}

SemanticEncoder SemanticEncoder::create(std::uint64_t seed, std::size_t embed_dim, std::size_t hidden,
                                        std::size_t layers) {
  SemanticEncoder enc = shaped(embed_dim, hidden, layers);
  Philox root(seed);
  enc.projection_ = seeded_init({kThumb * kThumb, embed_dim},
                                InitScheme::gaussian(1.0 / static_cast<double>(kThumb)), root.split(0).next_u64());
  const auto gru_init = InitScheme::uniform_fan_in(hidden);
  std::uint64_t stream = 1;
  for (auto& layer : enc.layers_) {
    for (auto& d : layer) {
      d.w_ih = seeded_init(d.w_ih.shape(), gru_init, root.split(stream++).next_u64());
      d.w_hh = seeded_init(d.w_hh.shape(), gru_init, root.split(stream++).next_u64());
      d.b_ih = seeded_init(d.b_ih.shape(), gru_init, root.split(stream++).next_u64());
      d.b_hh = seeded_init(d.b_hh.shape(), gru_init, root.split(stream++).next_u64());
    }
  }
  return enc;
}

SemanticEncoder SemanticEncoder::shaped(std::size_t embed_dim, std::size_t hidden, std::size_t layers) {
  if (embed_dim == 0 || hidden == 0 || layers == 0) throw UsageError("semantic encoder sizes must be positive");
  SemanticEncoder enc;
  enc.projection_ = Tensor({kThumb * kThumb, embed_dim});
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? embed_dim : 2 * hidden;
    std::array<GruDirection, 2> pair;
    for (auto& d : pair) {
      d = {Tensor({in, 3 * hidden}), Tensor({hidden, 3 * hidden}), Tensor({3 * hidden}), Tensor({3 * hidden})};
    }
    enc.layers_.push_back(std::move(pair));
  }
  return enc;
}

Tensor SemanticEncoder::embed_frames(const VideoTensor& video) const {
  const std::size_t T = video.frames();
  const std::size_t D = embed_dim();
  Tensor out({T, D});
  for (std::size_t t = 0; t < T; ++t) {
    auto thumb = frame_thumbnail(video, t);
    for (auto& v : thumb) v = 2.0 * v - 1.0;
    auto row = out.row(t);
    kernels::matmul(thumb, projection_.data(), row, 1, thumb.size(), D);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 1e-12) {
      for (auto& v : row) v /= norm;
    }
  }
  return out;
}

Tensor SemanticEncoder::aggregate(const Tensor& frame_embeddings) const {
  if (frame_embeddings.rank() != 2 || frame_embeddings.dim(1) != embed_dim()) {
    throw ShapeError("frame embeddings must be T x " + std::to_string(embed_dim()) + ", got " +
                     shape_string(frame_embeddings.shape()));
  }
  const std::size_t T = frame_embeddings.dim(0);
  const std::size_t H = hidden();
  Tensor seq = frame_embeddings;
  Tensor fwd, bwd;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    fwd = run_direction(layers_[l][0], seq, false);
    bwd = run_direction(layers_[l][1], seq, true);
    if (l + 1 < layers_.size()) {
      Tensor next({T, 2 * H});
      for (std::size_t t = 0; t < T; ++t) {
        auto dst = next.row(t);
        std::copy(fwd.row(t).begin(), fwd.row(t).end(), dst.begin());
        std::copy(bwd.row(t).begin(), bwd.row(t).end(), dst.begin() + static_cast<std::ptrdiff_t>(H));
      }
      seq = std::move(next);
    }
  }
  Tensor g({H});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < H; ++j) g[j] += 0.5 * (fwd.at(t, j) + bwd.at(t, j));
  }
  for (auto& v : g.data()) v /= static_cast<double>(T);
  return g;
}

Tensor SemanticEncoder::encode(const VideoTensor& video, const std::optional<Tensor>& external) const {
  if (!external) return aggregate(embed_frames(video));
  if (external->rank() != 2 || external->dim(0) != video.frames()) {
    throw FormatError("embedding table has " + std::to_string(external->rank() == 2 ? external->dim(0) : 0) +
                      " rows, video has " + std::to_string(video.frames()) + " frames");
  }
  if (external->dim(1) != embed_dim()) {
    throw FormatError("embedding width " + std::to_string(external->dim(1)) + " != " + std::to_string(embed_dim()));
  }
  return aggregate(*external);
}

std::vector<std::pair<std::string, const Tensor*>> SemanticEncoder::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.emplace_back("semantic.projection", &projection_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string p = "semantic.gru" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      const auto& dir = layers_[l][d];
      out.emplace_back(p + ".w_ih", &dir.w_ih);
      out.emplace_back(p + ".w_hh", &dir.w_hh);
      out.emplace_back(p + ".b_ih", &dir.b_ih);
      out.emplace_back(p + ".b_hh", &dir.b_hh);
    }
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> SemanticEncoder::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, ptr] : std::as_const(*this).named_tensors()) out.emplace_back(name, const_cast<Tensor*>(ptr));
  return out;
}

}  // namespace inrv

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv {

// Frozen video-level encoder producing the semantic code g of a video:
// per-frame embeddings -> stacked bidirectional GRU -> time-mean of the last
// layer's hidden states (forward and backward directions averaged).
//
// Frame embeddings come either from the builtin frozen projection (frame
// resampled to 16x16 grayscale, mapped to [-1, 1], multiplied by a seeded
// random 256 x embed_dim matrix, unit-normalized) or from an external
// per-frame embedding table, e.g. precomputed image-encoder features.
class SemanticEncoder {
 public:
  static constexpr std::size_t kThumb = 16;

  struct GruDirection {
    Tensor w_ih;  // [in x 3H], gate order (r, z, n)
    Tensor w_hh;  // [H x 3H]
    Tensor b_ih;  // [3H]
    Tensor b_hh;  // [3H]
  };

  SemanticEncoder() = default;
  static SemanticEncoder create(std::uint64_t seed, std::size_t embed_dim = 512, std::size_t hidden = 512,
                                std::size_t layers = 3);

  std::size_t embed_dim() const { return projection_.dim(1); }
  std::size_t hidden() const { return layers_.front()[0].w_hh.dim(0); }
  std::size_t num_layers() const { return layers_.size(); }

  // T x embed_dim builtin frame embeddings.
  Tensor embed_frames(const VideoTensor& video) const;
  // T x embed_dim embeddings -> hidden-sized code.
  Tensor aggregate(const Tensor& frame_embeddings) const;
  // Builtin path, or aggregate(external) when an embedding table is given;
  // external tables must have exactly T rows of width embed_dim.
  Tensor encode(const VideoTensor& video, const std::optional<Tensor>& external = std::nullopt) const;

  // Named frozen tensors, for persistence.
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  // Empty encoder with correctly shaped (zero) tensors, to be filled from disk.
  static SemanticEncoder shaped(std::size_t embed_dim, std::size_t hidden, std::size_t layers);

 private:
  Tensor projection_;  // [256 x embed_dim]
  std::vector<std::array<GruDirection, 2>> layers_;
};

// Area-weighted resample of one frame to kThumb x kThumb luma values in [0, 1].
std::vector<double> frame_thumbnail(const VideoTensor& video, std::size_t frame);

}  // namespace inrv

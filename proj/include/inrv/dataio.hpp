#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inrv/model.hpp"
#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv {

namespace fs = std::filesystem;

// ---- RVID: raw f32 video ---------------------------------------------------
//
//   "RVID" | u16 version | u32 T | u32 H | u32 W | u32 C | f32[T*H*W*C]
//
// Little-endian throughout, t-major then h, w, channel. Values are clamped to
// [0, 1] on write.
inline constexpr std::uint16_t kRvidVersion = 1;
inline constexpr std::size_t kRvidHeaderBytes = 22;

std::vector<std::uint8_t> encode_rvid(const VideoTensor& video);
VideoTensor decode_rvid(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");
void write_rvid(const fs::path& path, const VideoTensor& video);
VideoTensor read_rvid(const fs::path& path);

// ---- Frame directories -----------------------------------------------------
//
// frame_00000.ppm, frame_00001.ppm, ... as binary 8-bit PPM (P6).
VideoTensor read_frame_dir(const fs::path& dir);
void write_frame_dir(const fs::path& dir, const VideoTensor& video);

// ---- EMBF: per-frame embedding table ---------------------------------------
//
//   "EMBF" | u32 rows | u32 width | f32[rows*width]
inline constexpr std::size_t kEmbeddingWidth = 512;

void write_embeddings(const fs::path& path, const Tensor& table);
// Throws FormatError unless the width is kEmbeddingWidth.
Tensor read_embeddings(const fs::path& path);

// ---- BouncingBall ----------------------------------------------------------

struct BouncingBallConfig {
  std::size_t count = 50;
  std::size_t size = 100;
  std::size_t frames = 25;
  std::uint64_t seed = 0;
  std::size_t heldout = 1;  // extra videos at heights between training heights

  static constexpr std::array<double, 3> kColor = {0.1, 0.2, 0.9};
  static constexpr double kBandLow = 0.15;
  static constexpr double kBandSpan = 0.7;

  double radius() const { return static_cast<double>(size) / 12.0; }
  double speed() const { return 1.5 * static_cast<double>(size) / static_cast<double>(frames); }
};

struct BallTrack {
  double height = 0.0;  // vertical center in pixel units, pixel centers at i + 0.5
  double x0 = 0.0;      // horizontal center at frame 0
  int direction = 1;    // +1 moving right, -1 moving left
};

struct BouncingBallSet {
  BouncingBallConfig config;
  std::vector<BallTrack> tracks;          // one per training video
  std::vector<BallTrack> heldout_tracks;  // unseen heights
  std::vector<VideoTensor> videos;
  std::vector<VideoTensor> heldout;
};

// Horizontal center at frame t with elastic reflection between the walls.
double ball_position(const BouncingBallConfig& config, const BallTrack& track, std::size_t frame);
VideoTensor render_ball(const BouncingBallConfig& config, const BallTrack& track);
BouncingBallSet gen_bouncing_ball(const BouncingBallConfig& config);

// Alpha-weighted vertical centroid of the ball in one frame, in the same
// units as BallTrack::height. Ball coverage is read off the red channel.
double ball_centroid_height(const VideoTensor& video, std::size_t frame);

// Writes video_NNNNN.rvid, heldout_NNNNN.rvid and dataset.json.
void write_dataset(const fs::path& dir, const BouncingBallSet& set);

struct Dataset {
  std::vector<VideoTensor> videos;
  std::vector<std::string> names;
};

// Training videos of a dataset directory: the files listed in dataset.json,
// or every *.rvid in name order when there is no metadata.
Dataset load_dataset(const fs::path& dir);

// ---- INRV checkpoints ------------------------------------------------------
//
//   "INRV" | u16 version | u32 meta_len | meta (UTF-8 JSON) | u32 count |
//   count x (u32 name_len | name | u32 rank | u64 dims[rank] | f64 data)
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");
void write_checkpoint(const fs::path& path, const Model& model);
Model read_checkpoint(const fs::path& path);

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace inrv

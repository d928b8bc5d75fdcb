#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "inrv/dataio.hpp"
#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

namespace {

constexpr std::uint64_t kTrackStream = 1;
constexpr std::uint64_t kHeldoutStream = 1u << 20;

double band_height(const BouncingBallConfig& c, double slot, std::size_t slots) {
  const double S = static_cast<double>(c.size);
  const double frac = slots > 1 ? slot / static_cast<double>(slots - 1) : 0.5;
  return S * BouncingBallConfig::kBandLow + S * BouncingBallConfig::kBandSpan * frac;
}

BallTrack draw_track(const BouncingBallConfig& c, double height, Philox rng) {
  const double r = c.radius();
  BallTrack t;
  t.height = height;
  t.x0 = r + (static_cast<double>(c.size) - 2.0 * r) * rng.uniform();
  t.direction = rng.below(2) == 0 ? -1 : 1;
  return t;
}

std::string numbered(const char* prefix, std::size_t n) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s_%05zu.rvid", prefix, n);
  return buf;
}

nlohmann::json track_json(const BallTrack& t, const std::string& file) {
  return {{"file", file}, {"height", t.height}, {"x0", t.x0}, {"direction", t.direction}};
}

}  // namespace

double ball_position(const BouncingBallConfig& c, const BallTrack& track, std::size_t frame) {
  const double lo = c.radius();
  const double span = static_cast<double>(c.size) - 2.0 * lo;
  const double x = track.x0 + track.direction * c.speed() * static_cast<double>(frame);
  // Unfold the reflections: position along a sawtooth of period 2 * span.
  double p = std::fmod(x - lo, 2.0 * span);
  if (p < 0.0) p += 2.0 * span;
  return lo + (p <= span ? p : 2.0 * span - p);
}

VideoTensor render_ball(const BouncingBallConfig& c, const BallTrack& track) {
  const std::size_t S = c.size;
  const double r = c.radius();
  VideoTensor video({c.frames, S, S});
  for (std::size_t t = 0; t < c.frames; ++t) {
    const double x = ball_position(c, track, t);
    for (std::size_t h = 0; h < S; ++h) {
      for (std::size_t w = 0; w < S; ++w) {
        const double dy = static_cast<double>(h) + 0.5 - track.height;
        const double dx = static_cast<double>(w) + 0.5 - x;
        const double alpha = std::clamp(r + 0.5 - std::sqrt(dx * dx + dy * dy), 0.0, 1.0);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          video.set(t, h, w, ch, alpha * BouncingBallConfig::kColor[ch] + (1.0 - alpha));
        }
      }
    }
  }
  return video;
}

BouncingBallSet gen_bouncing_ball(const BouncingBallConfig& c) {
  if (c.size < 16) throw UsageError("bouncing ball frame size must be at least 16, got " + std::to_string(c.size));
  if (c.count == 0) throw UsageError("bouncing ball dataset needs at least one video");
  if (c.frames == 0) throw UsageError("bouncing ball videos need at least one frame");
  BouncingBallSet set;
  set.config = c;
  Philox root(c.seed);

  // Heights are the equally spaced slots, dealt out in a seeded order so that
  // every dataset prefix spans the band.
  std::vector<std::size_t> slot(c.count);
  std::iota(slot.begin(), slot.end(), 0);
  Philox shuffle = root.split(0);
  for (std::size_t i = c.count; i > 1; --i) std::swap(slot[i - 1], slot[shuffle.below(i)]);

  for (std::size_t n = 0; n < c.count; ++n) {
    const double height = band_height(c, static_cast<double>(slot[n]), c.count);
    set.tracks.push_back(draw_track(c, height, root.split(kTrackStream + n)));
    set.videos.push_back(render_ball(c, set.tracks.back()));
  }
  // Held-out heights sit halfway between adjacent training slots, starting
  // from the middle of the band.
  for (std::size_t k = 0; k < c.heldout; ++k) {
    double height;
    if (c.count > 1) {
      const std::size_t gaps = c.count - 1;
      const double s = static_cast<double>((gaps / 2 + k) % gaps) + 0.5;
      height = band_height(c, s, c.count);
    } else {
      height = band_height(c, 0.25 * static_cast<double>(k + 1), 2);
    }
    set.heldout_tracks.push_back(draw_track(c, height, root.split(kHeldoutStream + k)));
    set.heldout.push_back(render_ball(c, set.heldout_tracks.back()));
  }
  return set;
}

double ball_centroid_height(const VideoTensor& video, std::size_t frame) {
  const double bg = 1.0 - BouncingBallConfig::kColor[0];
  double mass = 0.0, moment = 0.0;
  for (std::size_t h = 0; h < video.height(); ++h) {
    for (std::size_t w = 0; w < video.width(); ++w) {
      const double a = std::clamp((1.0 - video.at(frame, h, w, 0)) / bg, 0.0, 1.0);
      mass += a;
      moment += a * (static_cast<double>(h) + 0.5);
    }
  }
  if (mass <= 0.0) return std::nan("");
  return moment / mass;
}

void write_dataset(const fs::path& dir, const BouncingBallSet& set) {
  fs::create_directories(dir);
  const auto& c = set.config;
  nlohmann::json meta;
  meta["generator"] = "bouncing-ball";
  meta["count"] = c.count;
  meta["size"] = c.size;
  meta["frames"] = c.frames;
  meta["seed"] = c.seed;
  meta["radius"] = c.radius();
  meta["color"] = BouncingBallConfig::kColor;
  meta["background"] = {1.0, 1.0, 1.0};
  meta["speed_px_per_frame"] = c.speed();
  meta["height_band"] = {BouncingBallConfig::kBandLow, BouncingBallConfig::kBandLow + BouncingBallConfig::kBandSpan};
  meta["anti_aliasing"] = "alpha = clamp(radius + 0.5 - distance to pixel center, 0, 1)";
  meta["videos"] = nlohmann::json::array();
  meta["heldout"] = nlohmann::json::array();
  for (std::size_t n = 0; n < set.videos.size(); ++n) {
    const std::string file = numbered("video", n);
    write_rvid(dir / file, set.videos[n]);
    meta["videos"].push_back(track_json(set.tracks[n], file));
  }
  for (std::size_t k = 0; k < set.heldout.size(); ++k) {
    const std::string file = numbered("heldout", k);
    write_rvid(dir / file, set.heldout[k]);
    meta["heldout"].push_back(track_json(set.heldout_tracks[k], file));
  }
  const std::string text = meta.dump(2) + "\n";
  write_file(dir / "dataset.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("dataset '" + dir.string() + "' is not a directory");
  Dataset ds;
  const fs::path meta_path = dir / "dataset.json";
  if (fs::exists(meta_path)) {
    nlohmann::json meta;
    try {
      const auto bytes = read_file(meta_path);
      meta = nlohmann::json::parse(bytes.begin(), bytes.end());
      for (const auto& v : meta.at("videos")) ds.names.push_back(v.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.path().extension() == ".rvid" && name.rfind("heldout_", 0) != 0) ds.names.push_back(name);
    }
    std::sort(ds.names.begin(), ds.names.end());
  }
  if (ds.names.empty()) throw FormatError("dataset '" + dir.string() + "' has no videos");
  for (const auto& name : ds.names) ds.videos.push_back(read_rvid(dir / name));
  return ds;
}

}  // namespace inrv

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "binary.hpp"
#include "inrv/dataio.hpp"
#include "inrv/errors.hpp"

namespace inrv {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError("error while reading '" + path.string() + "'");
  return bytes;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("error while writing '" + path.string() + "'");
}

std::vector<std::uint8_t> encode_rvid(const VideoTensor& video) {
  detail::ByteWriter w;
  w.str("RVID");
  w.u16(kRvidVersion);
  w.u32(static_cast<std::uint32_t>(video.frames()));
  w.u32(static_cast<std::uint32_t>(video.height()));
  w.u32(static_cast<std::uint32_t>(video.width()));
  w.u32(static_cast<std::uint32_t>(VideoTensor::kChannels));
  for (double v : video.data()) w.f32(static_cast<float>(std::clamp(v, 0.0, 1.0)));
  return std::move(w.bytes());
}

VideoTensor decode_rvid(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  detail::ByteReader r(bytes, origin);
  if (r.str(4, "magic") != "RVID") throw FormatError(origin + ": bad magic, not an RVID file");
  const auto version = r.u16("version");
  if (version != kRvidVersion) {
    throw FormatError(origin + ": RVID version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kRvidVersion) + ")");
  }
  const std::uint32_t T = r.u32("T"), H = r.u32("H"), W = r.u32("W"), C = r.u32("C");
  if (T == 0 || H == 0 || W == 0) throw FormatError(origin + ": zero video dimension");
  if (C != VideoTensor::kChannels) throw FormatError(origin + ": " + std::to_string(C) + " channels, expected 3");
  const std::uint64_t count = std::uint64_t{T} * H * W * C;
  if (r.remaining() != count * 4) {
    throw FormatError(origin + ": payload has " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(count * 4) + (r.remaining() < count * 4 ? " (truncated)" : " (trailing data)"));
  }
  std::vector<double> px(count);
  for (auto& v : px) {
    v = r.f32("payload");
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw FormatError(origin + ": pixel value outside [0, 1]");
  }
  return VideoTensor({T, H, W}, std::move(px));
}

void write_rvid(const fs::path& path, const VideoTensor& video) { write_file(path, encode_rvid(video)); }

VideoTensor read_rvid(const fs::path& path) { return decode_rvid(read_file(path), path.string()); }

namespace {

struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;
};

PpmImage parse_ppm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip_space();
    std::size_t v = 0;
    const auto* first = reinterpret_cast<const char*>(bytes.data() + pos);
    const auto* last = reinterpret_cast<const char*>(bytes.data() + bytes.size());
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) throw FormatError(origin + ": bad PPM " + what);
    pos += static_cast<std::size_t>(ptr - first);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError(origin + ": not a binary PPM (P6)");
  pos = 2;
  PpmImage img;
  img.width = number("width");
  img.height = number("height");
  const std::size_t maxval = number("maxval");
  if (img.width == 0 || img.height == 0) throw FormatError(origin + ": zero image dimension");
  if (maxval != 255) throw FormatError(origin + ": only 8-bit PPM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(origin + ": bad PPM header");
  ++pos;
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() - pos != n) throw FormatError(origin + ": PPM payload size does not match its header");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

std::string frame_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.ppm", t);
  return buf;
}

}  // namespace

VideoTensor read_frame_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("'" + dir.string() + "' is not a directory");
  std::map<std::size_t, fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != 15 || name.rfind("frame_", 0) != 0 || entry.path().extension() != ".ppm") continue;
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 6, name.data() + 11, idx);
    if (ec != std::errc() || ptr != name.data() + 11) continue;
    frames.emplace(idx, entry.path());
  }
  if (frames.empty()) throw FormatError("'" + dir.string() + "' contains no frame_NNNNN.ppm files");
  std::size_t expect = 0;
  for (const auto& [idx, path] : frames) {
    if (idx != expect) throw FormatError("'" + dir.string() + "': missing frame " + std::to_string(expect));
    ++expect;
  }
  std::vector<double> px;
  std::size_t H = 0, W = 0;
  for (const auto& [idx, path] : frames) {
    const PpmImage img = parse_ppm(read_file(path), path.string());
    if (idx == 0) {
      H = img.height;
      W = img.width;
      px.reserve(frames.size() * H * W * 3);
    } else if (img.height != H || img.width != W) {
      throw FormatError(path.string() + ": frame is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        ", frame 0 is " + std::to_string(W) + "x" + std::to_string(H));
    }
    for (std::uint8_t b : img.rgb) px.push_back(static_cast<double>(b) / 255.0);
  }
  return VideoTensor({frames.size(), H, W}, std::move(px));
}

void write_frame_dir(const fs::path& dir, const VideoTensor& video) {
  fs::create_directories(dir);
  const std::string header =
      "P6\n" + std::to_string(video.width()) + " " + std::to_string(video.height()) + "\n255\n";
  const std::size_t frame_values = video.height() * video.width() * 3;
  for (std::size_t t = 0; t < video.frames(); ++t) {
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    const auto src = video.data().subspan(t * frame_values, frame_values);
    for (double v : src) bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    write_file(dir / frame_name(t), bytes);
  }
}

void write_embeddings(const fs::path& path, const Tensor& table) {
  if (table.rank() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_string(table.shape()));
  detail::ByteWriter w;
  w.str("EMBF");
  w.u32(static_cast<std::uint32_t>(table.dim(0)));
  w.u32(static_cast<std::uint32_t>(table.dim(1)));
  for (double v : table.data()) w.f32(static_cast<float>(v));
  write_file(path, w.bytes());
}

Tensor read_embeddings(const fs::path& path) {
  const auto bytes = read_file(path);
  const std::string origin = path.string();
  detail::ByteReader r(bytes, origin);
  if (r.str(4, "magic") != "EMBF") throw FormatError(origin + ": bad magic, not an EMBF file");
  const std::uint32_t rows = r.u32("row count");
  const std::uint32_t width = r.u32("width");
  if (rows == 0) throw FormatError(origin + ": embedding table has no rows");
  if (width != kEmbeddingWidth) {
    throw FormatError(origin + ": embedding width " + std::to_string(width) + ", expected " +
                      std::to_string(kEmbeddingWidth));
  }
  const std::uint64_t count = std::uint64_t{rows} * width;
  if (r.remaining() != count * 4) throw FormatError(origin + ": payload size does not match " + std::to_string(rows) + " rows");
  std::vector<double> data(count);
  for (auto& v : data) {
    v = r.f32("payload");
    if (!std::isfinite(v)) throw FormatError(origin + ": non-finite embedding value");
  }
  return Tensor({rows, width}, std::move(data));
}

}  // namespace inrv

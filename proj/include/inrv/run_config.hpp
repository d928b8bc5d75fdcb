#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "inrv/dataio.hpp"
#include "inrv/inversion.hpp"
#include "inrv/trainer.hpp"

namespace inrv {

// Plain-text run configuration: UTF-8 `key = value` lines, `#` starts a
// comment. Every key has a default; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);

  void parse(const std::string& text, const std::string& origin = "<config>");
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool known(const std::string& key) const { return values_.count(key) != 0; }

  // Every key in name order as `key = value` lines.
  std::string resolved() const;
  // FNV-1a of resolved(), 16 hex digits.
  std::string hash() const;

  ModelConfig model() const;
  TrainConfig train() const;
  SingleInrConfig single_inr() const;
  InvertConfig inversion() const;
  BouncingBallConfig bouncing_ball() const;
  std::uint64_t seed() const;
  std::size_t threads() const;
  std::size_t render_chunk() const;

  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace inrv

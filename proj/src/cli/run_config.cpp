#include "inrv/run_config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "inrv/errors.hpp"

namespace inrv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), nullptr, 10);
  if (errno == ERANGE) throw UsageError("config key '" + key + "' is out of range: '" + text + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig::RunConfig() {
  values_ = {
      {"profile", "test"},
      // Architecture overrides; empty keeps the profile's value.
      {"bands", ""},
      {"field_hidden", ""},
      {"head_hidden", ""},
      {"fusion_hidden", ""},
      {"context_dim", ""},
      {"semantic_dim", ""},
      {"instance_dim", ""},
      {"head_out_scale", ""},
      {"seed", "0"},
      {"lr", "1e-4"},
      {"threshold", "1e-3"},
      {"max_epochs", "300"},
      {"pixel_batch", "1024"},
      {"video_batch", "10"},
      {"regularization", "semantic"},
      {"kl_weight", "1"},
      {"code_sigma", "0.01"},
      {"first_stage", "1"},
      {"log_every", "1"},
      {"single_steps", "750"},
      {"single_lr", "1e-4"},
      {"invert_steps", "500"},
      {"invert_lr", "1e-2"},
      {"data_count", "50"},
      {"data_size", "100"},
      {"data_frames", "25"},
      {"data_heldout", "1"},
      {"render_chunk", "8192"},
      {"threads", "0"},
  };
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c;
  c.parse(buf.str(), path.string());
  return c;
}

void RunConfig::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : resolved()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double RunConfig::real(const std::string& key) const {
  const std::string& text = get(key);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') throw UsageError("config key '" + key + "' expects a number, got '" + text + "'");
  return v;
}

std::size_t RunConfig::count(const std::string& key) const { return parse_count(key, get(key)); }

ModelConfig RunConfig::model() const {
  const std::string& profile = get("profile");
  ModelConfig c;
  if (profile == "test" || profile == "custom") {
    c = ModelConfig::test();
  } else if (profile == "paper") {
    c = ModelConfig::paper();
  } else {
    throw UsageError("config key 'profile' must be test, paper or custom, got '" + profile + "'");
  }
  auto size_override = [&](const char* key, std::size_t& field) {
    if (!get(key).empty()) field = count(key);
  };
  size_override("bands", c.field.num_bands);
  size_override("field_hidden", c.field.hidden_width);
  size_override("head_hidden", c.head_hidden);
  size_override("fusion_hidden", c.fusion_hidden);
  size_override("context_dim", c.context_dim);
  size_override("semantic_dim", c.semantic_dim);
  size_override("instance_dim", c.instance_dim);
  if (!get("head_out_scale").empty()) c.head_out_scale = real("head_out_scale");
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.lr = real("lr");
  t.threshold = real("threshold");
  t.max_epochs.clear();
  for (const auto& item : split_list(get("max_epochs"))) t.max_epochs.push_back(parse_count("max_epochs", item));
  t.pixel_batch = count("pixel_batch");
  t.video_batch = count("video_batch");
  try {
    t.regularization = parse_regularization(get("regularization"));
  } catch (const UsageError& e) {
    throw UsageError(std::string("config key 'regularization': ") + e.what());
  }
  t.kl_weight = real("kl_weight");
  t.seed = seed();
  t.profile = get("profile");
  t.model = model();
  t.code_sigma = real("code_sigma");
  t.first_stage = count("first_stage");
  t.log_every = count("log_every");
  t.config_hash = hash();
  t.validate();
  return t;
}

SingleInrConfig RunConfig::single_inr() const {
  SingleInrConfig s;
  s.arch = model().field;
  s.steps = count("single_steps");
  s.lr = real("single_lr");
  s.pixel_batch = count("pixel_batch");
  s.seed = seed();
  return s;
}

InvertConfig RunConfig::inversion() const {
  InvertConfig c;
  c.steps = count("invert_steps");
  c.lr = real("invert_lr");
  return c;
}

BouncingBallConfig RunConfig::bouncing_ball() const {
  BouncingBallConfig b;
  b.count = count("data_count");
  b.size = count("data_size");
  b.frames = count("data_frames");
  b.heldout = count("data_heldout");
  b.seed = seed();
  return b;
}

std::uint64_t RunConfig::seed() const { return count("seed"); }
std::size_t RunConfig::threads() const { return count("threads"); }
std::size_t RunConfig::render_chunk() const {
  const std::size_t c = count("render_chunk");
  if (c == 0) throw UsageError("config key 'render_chunk' must be positive");
  return c;
}

}  // namespace inrv

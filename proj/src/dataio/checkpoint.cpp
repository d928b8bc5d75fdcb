#include <map>
#include <set>

#include <json.hpp>

#include "binary.hpp"
#include "inrv/dataio.hpp"
#include "inrv/errors.hpp"
#include "inrv/rng.hpp"

namespace inrv {

namespace {

using Json = nlohmann::json;

Mlp shaped_mlp(const std::vector<std::size_t>& widths) {
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    mlp.weights.emplace_back(Shape{widths[l], widths[l + 1]});
    mlp.biases.emplace_back(Shape{widths[l + 1]});
  }
  return mlp;
}

HypernetWeights shaped_weights(const ModelConfig& c) {
  const ThetaLayout layout(c.field);
  HypernetWeights w;
  const std::size_t hh = c.head_hidden;
  for (const auto& ls : layout.layers()) w.heads.push_back(shaped_mlp({c.instance_dim, hh, hh, hh, ls.params()}));
  const std::size_t fh = c.fusion_hidden;
  w.fusion = shaped_mlp({c.context_dim + c.semantic_dim, fh, fh, fh, c.instance_dim});
  return w;
}

void add_mlp(std::vector<std::pair<std::string, const Tensor*>>& out, const Mlp& mlp, const std::string& prefix) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    out.emplace_back(prefix + ".w" + std::to_string(l), &mlp.weights[l]);
    out.emplace_back(prefix + ".b" + std::to_string(l), &mlp.biases[l]);
  }
}

// Fixed serialization order of every learned or frozen tensor except the
// codebook, which is stored as two stacked matrices.
std::vector<std::pair<std::string, const Tensor*>> network_tensors(const Model& model) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  add_mlp(out, model.weights.fusion, "fusion");
  for (std::size_t h = 0; h < model.weights.heads.size(); ++h) {
    add_mlp(out, model.weights.heads[h], "head" + std::to_string(h));
  }
  for (auto& entry : model.encoder.named_tensors()) out.push_back(entry);
  return out;
}

Json metadata(const Model& m) {
  const auto& c = m.config;
  Json j;
  j["format"] = "inrv-checkpoint";
  j["profile"] = m.meta.profile;
  j["arch"] = {{"num_bands", c.field.num_bands},
               {"field_hidden", c.field.hidden_width},
               {"field_layers", c.field.num_layers()},
               {"head_hidden", c.head_hidden},
               {"fusion_hidden", c.fusion_hidden},
               {"context_dim", c.context_dim},
               {"semantic_dim", c.semantic_dim},
               {"instance_dim", c.instance_dim},
               {"head_out_scale", c.head_out_scale},
               {"theta_len", ThetaLayout(c.field).total_len()}};
  j["semantic_encoder"] = {{"embed_dim", m.encoder.embed_dim()},
                           {"hidden", m.encoder.hidden()},
                           {"layers", m.encoder.num_layers()},
                           {"seed", m.meta.semantic_seed}};
  j["codebook_size"] = m.codebook.size();
  j["seed"] = m.meta.seed;
  j["prng"] = std::string(Philox::kName);
  j["regularization"] = to_string(m.meta.regularization);
  j["stage"] = m.meta.stage;
  j["num_stages"] = m.meta.num_stages;
  j["config_hash"] = m.meta.config_hash;
  j["train_dims"] = {m.meta.train_dims.frames, m.meta.train_dims.height, m.meta.train_dims.width};
  return j;
}

void write_tensor(detail::ByteWriter& w, const std::string& name, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64(d);
  for (double v : t.data()) w.f64(v);
}

Tensor stack_rows(const LatentCodebook& cb, bool context) {
  const std::size_t width = context ? cb.context_dim() : cb.semantic_dim();
  Tensor out({cb.size(), width});
  for (std::size_t n = 0; n < cb.size(); ++n) {
    const Tensor& row = context ? cb.context(n) : cb.semantic(n);
    std::copy(row.data().begin(), row.data().end(), out.row(n).begin());
  }
  return out;
}

template <class T>
T field(const Json& j, const char* key, const std::string& origin) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": metadata field '" + key + "': " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  const Model& m = model;
  check_heads(m.weights, m.layout(), m.config);
  detail::ByteWriter w;
  w.str("INRV");
  w.u16(kCheckpointVersion);
  const std::string meta = metadata(m).dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.str(meta);
  const auto tensors = network_tensors(m);
  const bool has_codes = m.codebook.size() > 0;
  w.u32(static_cast<std::uint32_t>(tensors.size() + (has_codes ? 2 : 0)));
  for (const auto& [name, t] : tensors) write_tensor(w, name, *t);
  if (has_codes) {
    write_tensor(w, "codebook.context", stack_rows(m.codebook, true));
    write_tensor(w, "codebook.semantic", stack_rows(m.codebook, false));
  }
  return std::move(w.bytes());
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  detail::ByteReader r(bytes, origin);
  if (r.str(4, "magic") != "INRV") throw FormatError(origin + ": bad magic, not an INRV checkpoint");
  const auto version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw FormatError(origin + ": checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t meta_len = r.u32("metadata length");
  Json meta;
  try {
    meta = Json::parse(r.str(meta_len, "metadata"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin + ": metadata is not valid JSON: " + e.what());
  }

  Model model;
  ModelConfig& c = model.config;
  const Json arch = field<Json>(meta, "arch", origin);
  c.field.num_bands = field<std::size_t>(arch, "num_bands", origin);
  c.field.hidden_width = field<std::size_t>(arch, "field_hidden", origin);
  c.head_hidden = field<std::size_t>(arch, "head_hidden", origin);
  c.fusion_hidden = field<std::size_t>(arch, "fusion_hidden", origin);
  c.context_dim = field<std::size_t>(arch, "context_dim", origin);
  c.semantic_dim = field<std::size_t>(arch, "semantic_dim", origin);
  c.instance_dim = field<std::size_t>(arch, "instance_dim", origin);
  c.head_out_scale = field<double>(arch, "head_out_scale", origin);
  for (auto v : {c.field.num_bands, c.field.hidden_width, c.head_hidden, c.fusion_hidden, c.context_dim,
                 c.semantic_dim, c.instance_dim}) {
    if (v == 0) throw FormatError(origin + ": metadata has a zero architecture extent");
  }
  if (field<std::size_t>(arch, "field_layers", origin) != c.field.num_layers() ||
      field<std::size_t>(arch, "theta_len", origin) != ThetaLayout(c.field).total_len()) {
    throw FormatError(origin + ": metadata field layout is inconsistent with its widths");
  }
  const std::string prng = field<std::string>(meta, "prng", origin);
  if (prng != Philox::kName) throw FormatError(origin + ": checkpoint uses PRNG '" + prng + "'");

  auto& mm = model.meta;
  mm.profile = field<std::string>(meta, "profile", origin);
  mm.seed = field<std::uint64_t>(meta, "seed", origin);
  try {
    mm.regularization = parse_regularization(field<std::string>(meta, "regularization", origin));
  } catch (const UsageError& e) {
    throw FormatError(origin + ": " + e.what());
  }
  mm.stage = field<std::size_t>(meta, "stage", origin);
  mm.num_stages = field<std::size_t>(meta, "num_stages", origin);
  mm.config_hash = field<std::string>(meta, "config_hash", origin);
  const auto dims = field<std::vector<std::size_t>>(meta, "train_dims", origin);
  if (dims.size() != 3) throw FormatError(origin + ": train_dims must have three entries");
  mm.train_dims = {dims[0], dims[1], dims[2]};

  const Json sem = field<Json>(meta, "semantic_encoder", origin);
  mm.semantic_seed = field<std::uint64_t>(sem, "seed", origin);
  const auto embed = field<std::size_t>(sem, "embed_dim", origin);
  const auto hidden = field<std::size_t>(sem, "hidden", origin);
  if (hidden != c.semantic_dim) {
    throw FormatError(origin + ": semantic encoder width " + std::to_string(hidden) + " != semantic_dim " +
                      std::to_string(c.semantic_dim));
  }
  try {
    model.encoder = SemanticEncoder::shaped(embed, hidden, field<std::size_t>(sem, "layers", origin));
  } catch (const UsageError& e) {
    throw FormatError(origin + ": " + e.what());
  }
  model.weights = shaped_weights(c);
  const std::size_t count = field<std::size_t>(meta, "codebook_size", origin);

  std::map<std::string, Tensor*> expected;
  for (auto& [name, t] : network_tensors(model)) expected.emplace(name, const_cast<Tensor*>(t));
  Tensor context, semantic;
  if (count > 0) {
    context = Tensor({count, c.context_dim});
    semantic = Tensor({count, c.semantic_dim});
    expected.emplace("codebook.context", &context);
    expected.emplace("codebook.semantic", &semantic);
  }

  const std::uint32_t sections = r.u32("tensor count");
  std::set<std::string> seen;
  for (std::uint32_t s = 0; s < sections; ++s) {
    const std::string name = r.str(r.u32("tensor name length"), "tensor name");
    const auto it = expected.find(name);
    if (it == expected.end()) throw FormatError(origin + ": unknown tensor '" + name + "'");
    if (!seen.insert(name).second) throw FormatError(origin + ": tensor '" + name + "' appears twice");
    const std::uint32_t rank = r.u32("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64("tensor extent");
    Tensor& dst = *it->second;
    if (shape != dst.shape()) {
      throw FormatError(origin + ": tensor '" + name + "' has shape " + shape_string(shape) + ", metadata implies " +
                        shape_string(dst.shape()));
    }
    r.need(dst.size() * 8, "tensor data");
    for (auto& v : dst.data()) v = r.f64("tensor data");
    if (!dst.all_finite()) throw FormatError(origin + ": tensor '" + name + "' holds non-finite values");
  }
  if (r.remaining() != 0) throw FormatError(origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
  for (const auto& [name, t] : expected) {
    if (!seen.contains(name)) throw FormatError(origin + ": missing tensor '" + name + "'");
  }

  model.codebook = LatentCodebook(c.context_dim, c.semantic_dim);
  for (std::size_t n = 0; n < count; ++n) {
    const auto cr = context.row(n);
    const auto sr = semantic.row(n);
    model.codebook.append(Tensor({c.context_dim}, {cr.begin(), cr.end()}),
                          Tensor({c.semantic_dim}, {sr.begin(), sr.end()}));
  }
  return model;
}

void write_checkpoint(const fs::path& path, const Model& model) { write_file(path, encode_checkpoint(model)); }

Model read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path), path.string()); }

}  // namespace inrv

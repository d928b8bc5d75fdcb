#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "inrv/rng.hpp"
#include "inrv/trainer.hpp"
#include "objective.hpp"

namespace inrv {

namespace {

constexpr double kStep = 1e-3;
constexpr double kRelFloor = 1e-6;
constexpr std::size_t kMaxRedraws = 64;
constexpr std::size_t kMaxBases = 8;

struct Probe {
  std::vector<std::size_t> indices;
  Tensor features;
  std::vector<Tensor> targets;

  std::pair<double, std::uint64_t> loss(const Model& m) const {
    auto o = detail::build_objective(m, indices, features, targets, 1.0, false);
    const double v = o.graph.evaluate(o.total)[0];
    return {v, o.graph.activation_signature()};
  }
};

// Checks one base point. `exhausted` is set when some entry could not be
// probed without crossing a ReLU kink.
GradCheckReport check_base(Philox root, std::size_t samples_per_tensor, bool& exhausted) {
  exhausted = false;
  Model model = Model::create(ModelConfig::test(), root.split(0).next_u64(), Regularization::Semantic);
  const VideoDims dims{2, 4, 4};
  std::vector<VideoTensor> videos;
  std::vector<Tensor> semantic;
  for (std::size_t n = 0; n < 2; ++n) {
    Philox px = root.split(1 + n);
    std::vector<double> values(dims.pixels() * 3);
    for (auto& v : values) v = px.uniform();
    videos.emplace_back(dims, std::move(values));
    semantic.push_back(model.encoder.encode(videos.back()));
  }
  model.codebook = codebook_init(2, model.config.context_dim, model.config.semantic_dim, semantic,
                                 root.split(3).next_u64(), 1.0);

  std::vector<std::size_t> pixels(dims.pixels());
  std::iota(pixels.begin(), pixels.end(), 0);
  Probe probe{{0, 1}, positional_encode(grid_coords(dims, pixels), model.config.field.num_bands), {}};
  for (const auto& v : videos) probe.targets.push_back(pixel_targets(v, pixels));

  auto o = detail::build_objective(model, probe.indices, probe.features, probe.targets, 1.0, true);
  o.graph.evaluate(o.total);
  const std::uint64_t base_signature = o.graph.activation_signature();
  const Gradients grads = o.graph.backward(o.total);

  // Every learnable tensor: (name, gradient, accessor into a model copy).
  struct Target {
    std::string name;
    const Tensor* grad;
    std::function<double&(Model&, std::size_t)> entry;
    std::size_t size;
  };
  std::vector<Target> targets;
  const auto leaves = detail::weight_leaves(o.nodes, model.weights);
  std::size_t leaf_index = 0;
  auto add_mlp = [&](const std::string& prefix, std::size_t layers, auto locate) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (int bias = 0; bias < 2; ++bias) {
        const auto& [id, tensor] = leaves[leaf_index++];
        targets.push_back({prefix + (bias ? ".b" : ".w") + std::to_string(l), &grads.at(id),
                           [locate, l, bias](Model& m, std::size_t i) -> double& {
                             Mlp& mlp = locate(m);
                             return (bias ? mlp.biases[l] : mlp.weights[l])[i];
                           },
                           tensor->size()});
      }
    }
  };
  for (std::size_t h = 0; h < model.weights.heads.size(); ++h) {
    add_mlp("head" + std::to_string(h), model.weights.heads[h].weights.size(),
            [h](Model& m) -> Mlp& { return m.weights.heads[h]; });
  }
  add_mlp("fusion", model.weights.fusion.weights.size(), [](Model& m) -> Mlp& { return m.weights.fusion; });
  const std::size_t cdim = model.config.context_dim;
  targets.push_back({"context", &grads.at(o.codes),
                     [cdim](Model& m, std::size_t i) -> double& { return m.codebook.context(i / cdim)[i % cdim]; },
                     2 * cdim});

  GradCheckReport report;
  Model work = model;
  Philox pick = root.split(4);
  for (const auto& t : targets) {
    for (std::size_t s = 0; s < samples_per_tensor; ++s) {
      for (std::size_t attempt = 0;; ++attempt) {
        const std::size_t i = pick.below(t.size);
        double& x = t.entry(work, i);
        const double orig = x;
        double f[4];
        bool smooth = true;
        const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
        for (int k = 0; k < 4; ++k) {
          x = orig + offsets[k] * kStep;
          const auto [v, sig] = probe.loss(work);
          f[k] = v;
          smooth = smooth && sig == base_signature;
        }
        x = orig;
        if (!smooth) {
          ++report.redrawn;
          if (attempt < kMaxRedraws) continue;
          exhausted = true;
        }
        const double numeric = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * kStep);
        const double analytic = (*t.grad)[i];
        const double abs_err = std::abs(numeric - analytic);
        const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic), kRelFloor});
        report.max_abs = std::max(report.max_abs, abs_err);
        if (rel >= report.max_rel) {
          report.max_rel = rel;
          report.worst = t.name + "[" + std::to_string(i) + "]";
        }
        ++report.checked;
        break;
      }
    }
  }
  return report;
}

}  // namespace

GradCheckReport gradcheck(std::uint64_t seed, std::size_t samples_per_tensor) {
  GradCheckReport report;
  for (std::size_t base = 0; base < kMaxBases; ++base) {
    bool exhausted = false;
    report = check_base(Philox(seed).split(base), samples_per_tensor, exhausted);
    if (!exhausted) break;
  }
  return report;
}

}  // namespace inrv

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "inrv/graph.hpp"
#include "inrv/rng.hpp"
#include "inrv/tensor.hpp"
#include "inrv/video.hpp"

namespace inrv::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Philox rng(seed);
  for (auto& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline VideoTensor random_video(VideoDims dims, std::uint64_t seed) {
  Philox rng(seed);
  std::vector<double> px(dims.pixels() * 3);
  for (auto& v : px) v = rng.uniform();
  return VideoTensor(dims, std::move(px));
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Builds a scalar loss from leaf nodes; used to compare backward() against
// central differences of evaluate().
using LossBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

struct GradCheckResult {
  double max_rel = 0.0;
  double max_abs = 0.0;
};

inline GradCheckResult check_gradients(const std::vector<Tensor>& inputs, const LossBuilder& build,
                                       double step = 1e-5) {
  auto loss_at = [&](const std::vector<Tensor>& vals) {
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& v : vals) ids.push_back(g.leaf(Tensor(v).set_requires_grad(true)));
    return g.evaluate(build(g, ids))[0];
  };
  Graph g;
  std::vector<NodeId> ids;
  for (const auto& v : inputs) ids.push_back(g.leaf(Tensor(v).set_requires_grad(true)));
  const NodeId loss = build(g, ids);
  g.evaluate(loss);
  const Gradients grads = g.backward(loss);

  GradCheckResult r;
  std::vector<Tensor> work = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = work[k][i];
      work[k][i] = orig + step;
      const double up = loss_at(work);
      work[k][i] = orig - step;
      const double down = loss_at(work);
      work[k][i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads.at(ids[k])[i];
      r.max_abs = std::max(r.max_abs, std::abs(numeric - analytic));
      r.max_rel = std::max(r.max_rel, rel_error(analytic, numeric, 1e-6));
    }
  }
  return r;
}

}  // namespace inrv::testing

#pragma once

#include <cstdint>

#include "inrv/tensor.hpp"

namespace inrv {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment accumulators for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;

  static AdamState like(const Tensor& param) { return {Tensor(param.shape()), Tensor(param.shape()), 0}; }
};

// One bias-corrected Adam update of `param` in place. Throws ShapeError when
// shapes disagree and NumericError on a non-finite gradient.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config);

}  // namespace inrv

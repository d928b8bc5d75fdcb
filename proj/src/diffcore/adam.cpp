#include "inrv/adam.hpp"

#include <cmath>

#include "inrv/errors.hpp"

namespace inrv {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) state = AdamState::like(param);
  if (grad.shape() != param.shape() || state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
    throw ShapeError("adam_step: parameter " + shape_string(param.shape()) + ", gradient " +
                     shape_string(grad.shape()) + ", moments " + shape_string(state.m.shape()));
  }
  if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient");

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  auto p = param.data();
  auto m = state.m.data();
  auto v = state.v.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

}  // namespace inrv

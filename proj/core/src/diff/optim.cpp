#include "itx/diff/optim.hpp"

#include <cmath>

#include "itx/util/error.hpp"

namespace itx::diff {

void adam_step(ParamSet& params, const ParamSet& grads, OptimState& state, double lr,
               const AdamConfig& cfg) {
  require(params.congruent(grads), "adam_step: params and grads are not congruent");
  require(params.congruent(state.m), "adam_step: optimizer state does not match params");
  state.step += 1;
  state.lr = lr;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const Mat& g = grads.at(name);
    Mat& m = state.m.at(name);
    Mat& v = state.v.at(name);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  }
}

double sgd_step_clipped(ParamSet& params, const ParamSet& grads, double lr, double max_norm) {
  require(params.congruent(grads), "sgd_step_clipped: params and grads are not congruent");
  const double norm = std::sqrt(grads.squared_norm());
  double scale = 1.0;
  if (max_norm > 0.0 && norm > max_norm) scale = max_norm / norm;
  for (auto& [name, p] : params) p -= (lr * scale) * grads.at(name);
  return scale;
}

}  // namespace itx::diff

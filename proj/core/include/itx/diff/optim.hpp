#pragma once

#include <cstdint>

#include "itx/diff/param_set.hpp"

namespace itx::diff {

// First and second moment accumulators for Adam, plus the step counter and
// the learning rate most recently applied.
struct OptimState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;
  double lr = 0.0;

  static OptimState for_params(const ParamSet& params) {
    OptimState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update, in place.  Deterministic: iteration order
// over entries is the ParamSet's fixed name order.
void adam_step(ParamSet& params, const ParamSet& grads, OptimState& state, double lr,
               const AdamConfig& cfg = {});

// Plain gradient step with global-norm clipping: if the joint Euclidean norm
// of all gradients exceeds max_norm they are rescaled to exactly max_norm.
// Returns the scale factor that was applied (1 when no clipping happened).
double sgd_step_clipped(ParamSet& params, const ParamSet& grads, double lr, double max_norm);

}  // namespace itx::diff

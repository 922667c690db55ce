// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/nn/optim.hpp"

#include <cmath>

namespace coughsense::nn {

double OptimizerState::effective_lr() const {
  const int steps = step_every > 0 ? epoch / step_every : 0;
  return base_lr * std::pow(step_factor, steps);
}

void sgd_step(const std::vector<LayerParam*>& params, const OptimizerState& state) {
  const double lr = state.effective_lr();
  for (LayerParam* p : params) {
    Tensor& w = p->weights();
    const Tensor& g = p->gradient();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * (g[i] + state.weight_decay * w[i]);
    }
  }
}

void zero_grad(const std::vector<LayerParam*>& params) {
  for (LayerParam* p : params) p->gradient().fill(0.0);
}

}  // namespace coughsense::nn

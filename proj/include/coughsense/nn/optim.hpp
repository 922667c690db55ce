// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "coughsense/nn/layers.hpp"

namespace coughsense::nn {

/// Plain SGD with weight decay and a step learning-rate schedule.
struct OptimizerState {
  double base_lr = 0.01;
  int epoch = 0;
  double weight_decay = 1e-4;
  double step_factor = 0.1;
  int step_every = 20;
  int max_epochs = 60;

  /// base_lr * step_factor^floor(epoch / step_every)
  double effective_lr() const;
};

/// w <- w - lr * (g + weight_decay * w) for every parameter.
void sgd_step(const std::vector<LayerParam*>& params, const OptimizerState& state);

void zero_grad(const std::vector<LayerParam*>& params);

}  // namespace coughsense::nn

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/nn/layers.hpp"

#include <cmath>

namespace coughsense::nn {

Tensor kaiming_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Conv2d::Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kh, std::size_t kw, Rng& rng)
    : weight(name + ".weight",
             kaiming_normal({out_channels, in_channels, kh, kw}, in_channels * kh * kw, rng)),
      bias(name + ".bias", Tensor({out_channels}, 0.0)) {}

BatchNorm2d::BatchNorm2d(const std::string& n, std::size_t channels)
    : gamma(n + ".gamma", Tensor({channels}, 1.0)),
      beta(n + ".beta", Tensor({channels}, 0.0)),
      stats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)},
      name(n) {}

Var BatchNorm2d::forward(const Var& x, Mode mode) {
  return batch_norm(x, gamma.var, beta.var, stats, mode == Mode::Train, kMomentum, kEps);
}

Var BatchNorm2d::forward_frozen(const Var& x) const {
  BatchNormStats copy = stats;  // inference mode reads only
  return batch_norm(x, gamma.var, beta.var, copy, false, kMomentum, kEps);
}

void BatchNorm2d::register_params(ParamRegistry& reg) {
  reg.add(gamma);
  reg.add(beta);
  reg.add_buffer(name + ".running_mean", stats.running_mean);
  reg.add_buffer(name + ".running_var", stats.running_var);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", kaiming_normal({out, in}, in, rng)),
      bias(name + ".bias", Tensor({out}, 0.0)) {}

ConvBlock::ConvBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                     std::size_t ph, std::size_t pw, Rng& rng)
    : conv(name + ".conv", in_channels, out_channels, 3, 3, rng),
      bn(name + ".bn", out_channels),
      pool_h(ph),
      pool_w(pw) {}

Var ConvBlock::forward(const Var& x, Mode mode) {
  return maxpool2d(relu(bn.forward(conv.forward(x), mode)), pool_h, pool_w);
}

Var ConvBlock::forward_frozen(const Var& x) const {
  return maxpool2d(relu(bn.forward_frozen(conv.forward(x))), pool_h, pool_w);
}

}  // namespace coughsense::nn

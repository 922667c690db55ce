// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coughsense/nn/autograd.hpp"
#include "coughsense/nn/ops.hpp"

namespace coughsense::nn {

using Rng = std::mt19937_64;

/// A trainable tensor. The gradient lives on the graph leaf.
struct LayerParam {
  std::string name;
  Var var;

  LayerParam() = default;
  LayerParam(std::string n, Tensor init) : name(std::move(n)), var(std::move(init), true) {}

  const Tensor& weights() const { return var.value(); }
  Tensor& weights() { return var.mutable_value(); }
  Tensor& gradient() { return var.mutable_grad(); }
};

/// Named pointer into a model's persistent state (parameters and buffers).
struct StateRef {
  std::string name;
  Tensor* tensor;
};

/// What a model exposes to the optimizer and to weight (de)serialization.
struct ParamRegistry {
  std::vector<LayerParam*> params;
  std::vector<StateRef> state;

  void add(LayerParam& p) {
    params.push_back(&p);
    state.push_back({p.name, &p.weights()});
  }
  void add_buffer(const std::string& name, Tensor& t) { state.push_back({name, &t}); }
};

enum class Mode { Train, Infer };

/// Kaiming-normal tensor: N(0, 2 / fan_in).
Tensor kaiming_normal(Shape shape, std::size_t fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kh, std::size_t kw, Rng& rng);

  Var forward(const Var& x) const { return conv2d(x, weight.var, bias.var); }
  void register_params(ParamRegistry& reg) {
    reg.add(weight);
    reg.add(bias);
  }

  LayerParam weight;  // [Co, Ci, kh, kw]
  LayerParam bias;    // [Co]
};

class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, std::size_t channels);

  Var forward(const Var& x, Mode mode);
  /// Inference-only path; never touches the running statistics.
  Var forward_frozen(const Var& x) const;
  void register_params(ParamRegistry& reg);

  LayerParam gamma;
  LayerParam beta;
  BatchNormStats stats;
  std::string name;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(const Var& x) const { return linear(x, weight.var, bias.var); }
  void register_params(ParamRegistry& reg) {
    reg.add(weight);
    reg.add(bias);
  }

  LayerParam weight;  // [out, in]
  LayerParam bias;    // [out]
};

/// conv (odd kernel, same padding) -> batch norm -> ReLU -> max pool.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
            std::size_t pool_h, std::size_t pool_w, Rng& rng);

  Var forward(const Var& x, Mode mode);
  Var forward_frozen(const Var& x) const;
  void register_params(ParamRegistry& reg) {
    conv.register_params(reg);
    bn.register_params(reg);
  }

  Conv2d conv;
  BatchNorm2d bn;
  std::size_t pool_h = 2;
  std::size_t pool_w = 2;
};

}  // namespace coughsense::nn

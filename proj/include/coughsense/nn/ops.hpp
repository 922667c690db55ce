// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "coughsense/nn/autograd.hpp"

namespace coughsense::nn {

// Elementwise, shapes must match exactly (no broadcasting).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

Var sum(const Var& a);   // -> [1]
Var mean(const Var& a);  // -> [1]

Var relu(const Var& x);
Var reshape(const Var& x, Shape shape);

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
/// [m,n] -> [n,m]
Var transpose(const Var& a);

/// Softmax over the last axis.
Var softmax(const Var& x);

/// -log softmax(logits)[target] for a logit vector of any shape with C elements.
Var cross_entropy(const Var& logits, std::size_t target);

/// Mean binary cross-entropy on logits; `targets` holds 0/1 with the same
/// element count as `logits`.
Var bce_with_logits(const Var& logits, const Tensor& targets);

/// x[N,Ci,H,W] * w[Co,Ci,kh,kw] + b[Co], stride 1, zero "same" padding of
/// (kh/2, kw/2). Kernel sizes must be odd.
Var conv2d(const Var& x, const Var& w, const Var& b);

struct BatchNormStats {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
};

/// Per-channel normalization over (N, H, W) for x[N,C,H,W] or x[N,C].
/// Training mode uses batch statistics and updates `stats`
/// (running = momentum * running + (1 - momentum) * batch); inference mode
/// uses the running estimates and leaves them untouched.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum = 0.9, double eps = 1e-5);

/// Non-overlapping kh x kw max pooling on [N,C,H,W]; ragged edges are padded
/// with -inf, so output dims are ceil(H/kh), ceil(W/kw).
Var maxpool2d(const Var& x, std::size_t kh, std::size_t kw);

/// Nearest-neighbour repetition on [N,C,H,W]. Factors must be >= 1.
Var upsample_nearest(const Var& x, std::size_t fh, std::size_t fw);

/// Concatenates [N,Ci,H,W] tensors along the channel axis.
Var concat_channels(const std::vector<Var>& xs);

/// Mean over one axis, which is removed from the shape.
Var mean_axis(const Var& x, std::size_t axis);

/// x[i] along the leading axis; the leading axis is dropped.
Var select(const Var& x, std::size_t index);

/// Stacks equally-shaped tensors along a new leading axis.
Var stack(const std::vector<Var>& xs);

/// x[N,in] * w[out,in]^T + b[out] -> [N,out]
Var linear(const Var& x, const Var& w, const Var& b);

/// Each column of x[D,T] rescaled to L2 norm `target_norm`.
Var normalize_columns(const Var& x, double target_norm);

}  // namespace coughsense::nn

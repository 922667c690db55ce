// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coughsense::detector {

using FeatureMatrix = std::vector<std::vector<double>>;

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// 1 / (d * Var(all entries)), the usual scale-aware default. Falls back to
/// 1 / d when every entry is equal.
double default_gamma(const FeatureMatrix& x);

/// Gaussian-kernel SVM. Decision value f(x) = sum_i alphas[i] k(sv_i, x) + bias,
/// where alphas carry the label sign.
struct SvmModel {
  FeatureMatrix support_vectors;
  std::vector<double> alphas;
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;

  double decision(std::span<const double> x) const;
  std::size_t dim() const { return support_vectors.empty() ? 0 : support_vectors.front().size(); }
};

struct SmoOptions {
  double C = 1.0;
  double gamma = 0.0;  // <= 0 selects default_gamma
  /// Stop when the maximal KKT violating pair differs by less than this.
  double tolerance = 1e-5;
  std::size_t max_iterations = 1000000;
};

struct SmoResult {
  SvmModel model;
  std::vector<double> dual;  // unsigned alpha per training example
  std::size_t iterations = 0;
  bool converged = false;
};

/// Sequential minimal optimization with maximal-violating-pair selection.
/// Labels must be +1 / -1. Throws InputError("degenerate labels") unless both
/// classes are present.
SmoResult smo_train(const FeatureMatrix& x, const std::vector<int>& labels,
                    const SmoOptions& options = {});

/// Largest KKT violation over the training set:
///   alpha = 0      needs y f(x) >= 1
///   0 < alpha < C  needs y f(x) == 1
///   alpha = C      needs y f(x) <= 1
double kkt_max_violation(const SmoResult& result, const FeatureMatrix& x,
                         const std::vector<int>& labels);

enum class FrameLabel { Other, Cough };

struct FrameDecision {
  FrameLabel label = FrameLabel::Other;
  double score = 0.0;
};

/// Cough iff the decision value is strictly positive.
FrameDecision classify_frame(const SvmModel& model, std::span<const double> feature);

}  // namespace coughsense::detector

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/detector/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coughsense/error.hpp"

namespace coughsense::detector {

namespace {

constexpr double kTau = 1e-12;
// Above this many examples kernel rows are recomputed instead of cached.
constexpr std::size_t kFullKernelLimit = 3000;

class KernelRows {
 public:
  KernelRows(const FeatureMatrix& x, double gamma) : x_(x), gamma_(gamma), n_(x.size()) {
    if (n_ <= kFullKernelLimit) {
      full_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
          const double k = rbf_kernel(x_[i], x_[j], gamma_);
          full_[i * n_ + j] = k;
          full_[j * n_ + i] = k;
        }
      }
    }
  }

  /// Row i of the kernel matrix. The returned span is valid until the next
  /// call with `slot` when rows are computed on demand.
  std::span<const double> row(std::size_t i, int slot) {
    if (!full_.empty()) return std::span<const double>(full_).subspan(i * n_, n_);
    auto& buf = scratch_[slot];
    buf.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) buf[j] = rbf_kernel(x_[i], x_[j], gamma_);
    return buf;
  }

 private:
  const FeatureMatrix& x_;
  double gamma_;
  std::size_t n_;
  std::vector<double> full_;
  std::vector<double> scratch_[2];
};

void check_inputs(const FeatureMatrix& x, const std::vector<int>& labels) {
  if (x.size() != labels.size()) {
    throw ShapeError("smo_train: " + std::to_string(x.size()) + " features but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (x.size() < 2) throw InputError("smo_train: need at least 2 examples");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) {
      pos = true;
    } else if (y == -1) {
      neg = true;
    } else {
      throw InputError("smo_train: labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw InputError("smo_train: degenerate labels (one class only)");
  const std::size_t d = x.front().size();
  for (const auto& row : x) {
    if (row.size() != d) throw ShapeError("smo_train: ragged feature matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw NumericError("smo_train: non-finite feature value");
    }
  }
}

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d2 += diff * diff;
  }
  return std::exp(-gamma * d2);
}

double default_gamma(const FeatureMatrix& x) {
  if (x.empty() || x.front().empty()) throw InputError("default_gamma: empty feature matrix");
  const std::size_t d = x.front().size();
  double mean = 0.0;
  std::size_t count = 0;
  for (const auto& row : x) {
    for (double v : row) mean += v;
    count += row.size();
  }
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (const auto& row : x) {
    for (double v : row) var += (v - mean) * (v - mean);
  }
  var /= static_cast<double>(count);
  if (!(var > 0.0)) return 1.0 / static_cast<double>(d);
  return 1.0 / (static_cast<double>(d) * var);
}

double SvmModel::decision(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw ShapeError("svm: feature length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(dim()));
  }
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) {
    f += alphas[i] * rbf_kernel(support_vectors[i], x, gamma);
  }
  return f;
}

SmoResult smo_train(const FeatureMatrix& x, const std::vector<int>& labels,
                    const SmoOptions& options) {
  check_inputs(x, labels);
  if (!(options.C > 0.0)) throw InputError("smo_train: C must be positive");
  const double gamma = options.gamma > 0.0 ? options.gamma : default_gamma(x);
  const double C = options.C;
  const std::size_t n = x.size();

  KernelRows kernel(x, gamma);
  std::vector<double> y(n), alpha(n, 0.0), grad(n, -1.0);  // grad of 0.5 a'Qa - e'a
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i];

  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

  SmoResult result;
  std::size_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == n || j == n || g_max - g_min < options.tolerance) {
      result.converged = true;
      break;
    }

    const auto ki = kernel.row(i, 0);
    const auto kj = kernel.row(j, 1);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = ki[i] + kj[j] + 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = ki[i] + kj[j] - 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double total = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (total > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = total - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = total;
      }
      if (total > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = total - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = total;
      }
    }

    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
    }
  }
  result.iterations = iter;

  // rho: mean of y*grad over free vectors, else the midpoint of the feasible range
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double ub = std::numeric_limits<double>::infinity(), lb = -ub;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] > 0 && alpha[t] < C) {
      free_sum += yg;
      ++free_count;
    } else if ((alpha[t] >= C && y[t] < 0) || (alpha[t] <= 0 && y[t] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;

  SvmModel& m = result.model;
  m.gamma = gamma;
  m.C = C;
  m.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0) {
      m.support_vectors.push_back(x[t]);
      m.alphas.push_back(alpha[t] * y[t]);
    }
  }
  result.dual = std::move(alpha);
  return result;
}

double kkt_max_violation(const SmoResult& result, const FeatureMatrix& x,
                         const std::vector<int>& labels) {
  const double C = result.model.C;
  double worst = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double margin = labels[t] * result.model.decision(x[t]);
    const double a = result.dual[t];
    double v = 0.0;
    if (a <= 0.0) {
      v = std::max(0.0, 1.0 - margin);
    } else if (a >= C) {
      v = std::max(0.0, margin - 1.0);
    } else {
      v = std::abs(margin - 1.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

FrameDecision classify_frame(const SvmModel& model, std::span<const double> feature) {
  FrameDecision d;
  d.score = model.decision(feature);
  d.label = d.score > 0.0 ? FrameLabel::Cough : FrameLabel::Other;
  return d;
}

}  // namespace coughsense::detector

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coughsense::eval {

/// fold_of[id] is the test fold of example `id`.
struct FoldPlan {
  std::size_t n_folds = 0;
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> test_ids(std::size_t fold) const;
  std::vector<std::size_t> train_ids(std::size_t fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Random partition of ids 0..n-1 into folds whose sizes differ by at most
/// one. Throws InputError when n is 0 or smaller than n_folds.
FoldPlan make_folds(std::size_t n, std::size_t n_folds, std::uint64_t seed);

/// Same size guarantee, but each class is spread over the folds as evenly as
/// possible: ids are shuffled within their class and dealt round-robin.
FoldPlan make_stratified_folds(const std::vector<std::size_t>& labels, std::size_t n_folds,
                               std::uint64_t seed);

/// Rates in [0, 1]; a field is empty when its denominator is zero.
struct MetricReport {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> top1;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Binary metrics for `positive_class` against the rest; top1 is plain
/// multi-class accuracy.
MetricReport confusion_metrics(const std::vector<std::size_t>& predictions,
                               const std::vector<std::size_t>& labels, std::size_t positive_class);

/// Field-wise unweighted mean over the reports that define the field.
MetricReport average(const std::vector<MetricReport>& reports);

struct CvReport {
  std::vector<MetricReport> folds;
  MetricReport mean;
};

/// Predictions for `test` after training on `train`, in the order of `test`.
using FoldFn = std::function<std::vector<std::size_t>(const std::vector<std::size_t>& train,
                                                      const std::vector<std::size_t>& test)>;

struct CvOptions {
  std::size_t n_folds = 10;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::size_t positive_class = 0;
  /// Classes every training split must contain; empty means every class
  /// present in the labels.
  std::vector<std::size_t> required_classes;
  std::vector<std::string> class_names;  // for error messages
};

/// Trains on n-1 folds, evaluates on the held-out fold, for every fold.
/// Throws InputError naming the fold and class when a training split lacks a
/// required class.
CvReport run_cv(const std::vector<std::size_t>& labels, const FoldFn& fn, const CvOptions& options);

/// Comma-separated table: name, TPR, FPR, Sensitivity, Specificity, PPV,
/// NPV, Top1 as percentages with one decimal; undefined values print "n/a".
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace coughsense::eval

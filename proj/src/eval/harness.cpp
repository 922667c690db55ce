// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/eval/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "coughsense/error.hpp"

namespace coughsense::eval {

namespace {

void check_fold_count(std::size_t n, std::size_t n_folds) {
  if (n == 0) throw InputError("make_folds: no examples");
  if (n_folds == 0) throw InputError("make_folds: fold count must be positive");
  if (n_folds > n) {
    throw InputError("make_folds: " + std::to_string(n_folds) + " folds requested for " +
                     std::to_string(n) + " examples");
  }
}

/// Deals `order` round-robin, then relabels folds with a random permutation
/// so the larger folds are not always the first ones.
FoldPlan deal(const std::vector<std::size_t>& order, std::size_t n_folds, std::mt19937_64& rng) {
  std::vector<std::size_t> relabel(n_folds);
  std::iota(relabel.begin(), relabel.end(), 0);
  std::shuffle(relabel.begin(), relabel.end(), rng);
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.fold_of.assign(order.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) plan.fold_of[order[i]] = relabel[i % n_folds];
  return plan;
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<std::size_t> FoldPlan::test_ids(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_ids(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(n_folds, 0);
  for (std::size_t f : fold_of) ++sizes[f];
  return sizes;
}

FoldPlan make_folds(std::size_t n, std::size_t n_folds, std::uint64_t seed) {
  check_fold_count(n, n_folds);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return deal(order, n_folds, rng);
}

FoldPlan make_stratified_folds(const std::vector<std::size_t>& labels, std::size_t n_folds,
                               std::uint64_t seed) {
  check_fold_count(labels.size(), n_folds);
  std::mt19937_64 rng(seed);
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    order.insert(order.end(), members.begin(), members.end());
  }
  // one global counter across classes keeps fold sizes within one of each other
  return deal(order, n_folds, rng);
}

MetricReport confusion_metrics(const std::vector<std::size_t>& predictions,
                               const std::vector<std::size_t>& labels, std::size_t positive_class) {
  if (predictions.size() != labels.size()) {
    throw InputError("confusion_metrics: predictions and labels differ in length");
  }
  MetricReport m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == positive_class;
    const bool truth = labels[i] == positive_class;
    correct += predictions[i] == labels[i];
    if (pred && truth) {
      ++m.tp;
    } else if (pred) {
      ++m.fp;
    } else if (truth) {
      ++m.fn;
    } else {
      ++m.tn;
    }
  }
  m.tpr = ratio(m.tp, m.tp + m.fn);
  m.sensitivity = m.tpr;
  m.fpr = ratio(m.fp, m.fp + m.tn);
  m.specificity = ratio(m.tn, m.tn + m.fp);
  m.ppv = ratio(m.tp, m.tp + m.fp);
  m.npv = ratio(m.tn, m.tn + m.fn);
  m.top1 = ratio(correct, labels.size());
  return m;
}

MetricReport average(const std::vector<MetricReport>& reports) {
  auto mean_of = [&](std::optional<double> MetricReport::*field) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports) {
      if (r.*field) {
        sum += *(r.*field);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  MetricReport m;
  m.tpr = mean_of(&MetricReport::tpr);
  m.fpr = mean_of(&MetricReport::fpr);
  m.sensitivity = mean_of(&MetricReport::sensitivity);
  m.specificity = mean_of(&MetricReport::specificity);
  m.ppv = mean_of(&MetricReport::ppv);
  m.npv = mean_of(&MetricReport::npv);
  m.top1 = mean_of(&MetricReport::top1);
  for (const auto& r : reports) {
    m.tp += r.tp;
    m.fp += r.fp;
    m.tn += r.tn;
    m.fn += r.fn;
  }
  return m;
}

CvReport run_cv(const std::vector<std::size_t>& labels, const FoldFn& fn, const CvOptions& options) {
  const FoldPlan plan = options.stratified
                            ? make_stratified_folds(labels, options.n_folds, options.seed)
                            : make_folds(labels.size(), options.n_folds, options.seed);
  std::vector<std::size_t> required = options.required_classes;
  if (required.empty()) {
    const std::set<std::size_t> present(labels.begin(), labels.end());
    required.assign(present.begin(), present.end());
  }
  auto class_name = [&](std::size_t c) {
    return c < options.class_names.size() ? options.class_names[c] : std::to_string(c);
  };

  CvReport report;
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    const auto train = plan.train_ids(f);
    const auto test = plan.test_ids(f);
    std::set<std::size_t> seen;
    for (std::size_t id : train) seen.insert(labels[id]);
    for (std::size_t c : required) {
      if (!seen.count(c)) {
        throw InputError("cross-validation fold " + std::to_string(f) +
                         ": training split has no examples of class '" + class_name(c) + "'");
      }
    }
    const auto predictions = fn(train, test);
    if (predictions.size() != test.size()) {
      throw InputError("cross-validation fold " + std::to_string(f) +
                       ": wrong number of predictions");
    }
    std::vector<std::size_t> truth;
    truth.reserve(test.size());
    for (std::size_t id : test) truth.push_back(labels[id]);
    report.folds.push_back(confusion_metrics(predictions, truth, options.positive_class));
  }
  report.mean = average(report.folds);
  return report;
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::string out = "name,TPR,FPR,Sensitivity,Specificity,PPV,NPV,Top1\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
    return std::string(buf);
  };
  for (const auto& [name, m] : rows) {
    out += name;
    for (const auto* v : {&m.tpr, &m.fpr, &m.sensitivity, &m.specificity, &m.ppv, &m.npv, &m.top1}) {
      out += "," + cell(*v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace coughsense::eval

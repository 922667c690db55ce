// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

// Random inputs and structural checkers shared by the unit tests and the
// acceptance runner.

#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coughsense/detector/svm.hpp"
#include "coughsense/fewshot/fewshot.hpp"
#include "coughsense/nn/autograd.hpp"
#include "coughsense/nn/ops.hpp"
#include "coughsense/risk/records.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace coughsense;

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
  const std::size_t n = nn::shape_size(shape);
  return nn::Tensor(std::move(shape), oracle::random_vector(n, rng, lo, hi));
}

/// Values spread far enough apart that +/- h never crosses a ReLU kink or
/// reorders a pooling window.
inline nn::Tensor spread_tensor(nn::Shape shape, std::mt19937_64& rng) {
  const std::size_t n = nn::shape_size(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / n;
  std::shuffle(v.begin(), v.end(), rng);
  return nn::Tensor(std::move(shape), std::move(v));
}

inline nn::Var leaf(nn::Tensor t) { return nn::Var(std::move(t), true); }

/// Builds loss = sum(f(inputs) * probe) and compares backward() against
/// central differences for every input. Returns the worst relative error.
inline double grad_check(std::vector<nn::Var> inputs,
                         const std::function<nn::Var(const std::vector<nn::Var>&)>& f,
                         std::mt19937_64& rng) {
  nn::Tensor probe;
  {
    nn::NoGradGuard g;
    probe = random_tensor(f(inputs).shape(), rng);
  }
  auto loss_of = [&](const std::vector<nn::Var>& in) { return nn::sum(nn::mul(f(in), nn::Var(probe))); };
  for (auto& v : inputs) v.mutable_grad().fill(0.0);
  loss_of(inputs).backward();

  double worst = 0.0;
  for (auto& v : inputs) {
    std::vector<double> analytic = v.grad().storage();
    auto& x = v.mutable_value().storage();
    const auto numeric = oracle::finite_difference(x, [&] {
      nn::NoGradGuard g;
      return loss_of(inputs).value().item();
    });
    worst = std::max(worst, oracle::max_relative_error(analytic, numeric, 1e-6));
  }
  return worst;
}

/// Two Gaussian blobs in 2-d, labels +1 / -1.
inline void blobs(std::size_t n, std::mt19937_64& rng, detector::FeatureMatrix& x, std::vector<int>& y) {
  std::normal_distribution<double> g(0.0, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 ? 1 : -1;
    x.push_back({2.0 * label + g(rng), 2.0 * label + g(rng)});
    y.push_back(label);
  }
}

/// Uniform points in [-1,1]^2 labeled by quadrant sign, with a margin band
/// around the axes removed.
inline void xor_set(std::size_t draws, std::mt19937_64& rng, detector::FeatureMatrix& x,
                    std::vector<int>& y) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const double a = u(rng), b = u(rng);
    if (std::abs(a) < 0.15 || std::abs(b) < 0.15) continue;
    x.push_back({a, b});
    y.push_back(a * b > 0 ? 1 : -1);
  }
}

inline double svm_accuracy(const detector::SvmModel& m, const detector::FeatureMatrix& x,
                           const std::vector<int>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ok += (m.decision(x[i]) > 0.0) == (y[i] > 0);
  return static_cast<double>(ok) / x.size();
}

inline std::vector<double> random_attention(std::size_t t, std::mt19937_64& rng) {
  auto a = oracle::random_vector(t, rng, 0.01, 1.0);
  const double s = std::accumulate(a.begin(), a.end(), 0.0);
  for (double& v : a) v /= s;
  return a;
}

inline fewshot::Embedding random_embedding(std::size_t d, std::size_t t, std::mt19937_64& rng) {
  fewshot::Embedding e;
  e.d = d;
  e.t = t;
  e.x = oracle::random_vector(d * t, rng, -1.0, 1.0);
  e.attention = random_attention(t, rng);
  return e;
}

/// Dataset with `per_class[c]` empty items per class; only labels matter.
inline fewshot::Dataset label_only(const std::vector<std::size_t>& per_class) {
  fewshot::Dataset d;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    d.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      d.items.emplace_back();
      d.labels.push_back(c);
    }
  }
  return d;
}

/// Every structural property of one episode.
inline bool episode_valid(const fewshot::EpisodeSpec& ep, const fewshot::Dataset& d, std::size_t c,
                          std::size_t k) {
  if (ep.c != c || ep.k != k || ep.classes.size() != c || ep.support.size() != c) return false;
  if (std::set<std::size_t>(ep.classes.begin(), ep.classes.end()).size() != c) return false;
  if (ep.query_class >= c) return false;
  std::set<std::size_t> used;
  for (std::size_t e = 0; e < c; ++e) {
    if (ep.support[e].size() != k) return false;
    for (std::size_t id : ep.support[e]) {
      if (d.labels[id] != ep.classes[e] || !used.insert(id).second) return false;
    }
  }
  return d.labels[ep.query] == ep.classes[ep.query_class] && !used.count(ep.query);
}

/// Short strings over a character set that needs JSON escaping, always valid
/// UTF-8.
inline std::string random_text(std::mt19937_64& rng) {
  static const std::string chars = "abcXYZ 019_-\"\\/\n\t\xc3\xa9";
  std::uniform_int_distribution<std::size_t> len(0, 12), pick(0, chars.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) {
    const char c = chars[pick(rng)];
    if (static_cast<unsigned char>(c) >= 0x80) {
      s += "\xc3\xa9";
    } else {
      s += c;
    }
  }
  return s;
}

inline risk::EncounterRecord random_record(std::mt19937_64& rng) {
  using namespace risk;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EncounterRecord r;
  r.session_id = "id" + std::to_string(rng() % 100000);
  r.timestamp = random_text(rng);
  if (u(rng) < 0.8) r.temperature_c = 35.0 + 5.0 * u(rng);
  if (u(rng) < 0.5) r.demographics.age = static_cast<int>(rng() % 100);
  if (u(rng) < 0.5) r.demographics.sex = random_text(rng);
  r.location_note = random_text(rng);
  for (std::size_t i = rng() % 3; i > 0; --i) r.audio_refs.push_back(random_text(rng));
  for (std::size_t i = rng() % 4; i > 0; --i) {
    EventRecord e;
    e.start_s = 10.0 * u(rng);
    e.end_s = e.start_s + u(rng);
    e.peak_score = 5.0 * u(rng) - 1.0;
    e.predicted_class = random_text(rng);
    for (std::size_t c = rng() % 4; c > 0; --c) {
      e.scores.push_back({random_text(rng), 100.0 * u(rng) - 50.0, u(rng)});
    }
    r.events.push_back(e);
  }
  r.risk_score = u(rng);
  if (u(rng) < 0.5) r.alerts.push_back({AlertKind::HighCovidRisk, random_text(rng)});
  if (u(rng) < 0.5) r.alerts.push_back({AlertKind::NoCoughCaptured, random_text(rng)});
  if (u(rng) < 0.5) r.prompts_issued.push_back(random_text(rng));
  r.complete = u(rng) < 0.5;
  return r;
}

/// One event lasting `dur` seconds with P(COVID-19) = p_covid.
inline risk::EventRecord covid_event(double start, double dur, double p_covid) {
  risk::EventRecord e;
  e.start_s = start;
  e.end_s = start + dur;
  e.peak_score = 1.0;
  e.predicted_class = p_covid >= 0.5 ? "COVID-19" : "healthy";
  e.scores = {{"COVID-19", 0.0, p_covid}, {"healthy", 0.0, 1.0 - p_covid}};
  return e;
}

inline risk::EncounterRecord encounter(std::optional<double> temp, std::vector<risk::EventRecord> events) {
  risk::EncounterRecord r;
  r.session_id = "s1";
  r.timestamp = "2026-01-02T03:04:05Z";
  r.temperature_c = temp;
  r.events = std::move(events);
  return r;
}

}  // namespace fixture

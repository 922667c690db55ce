// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "coughsense/error.hpp"

namespace coughsense::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void scale_to_rms(std::vector<double>& x, double rms) {
  double s = 0.0;
  for (double v : x) s += v * v;
  const double cur = std::sqrt(s / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
  if (cur > 0) {
    for (double& v : x) v *= rms / cur;
  }
}

/// Sum of many random-phase sinusoids spread over [lo, hi] Hz.
std::vector<double> band_noise(std::size_t n, double lo, double hi, int rate, Rng& rng) {
  constexpr int kComponents = 60;
  std::vector<double> x(n, 0.0);
  for (int c = 0; c < kComponents; ++c) {
    const double f = uniform(rng, lo, hi);
    const double phase = uniform(rng, 0.0, kTwoPi);
    const double w = kTwoPi * f / rate;
    for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(w * static_cast<double>(i) + phase);
  }
  scale_to_rms(x, 1.0);
  return x;
}

}  // namespace

std::vector<double> pink_noise(std::size_t n, double rms, Rng& rng) {
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = white(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  scale_to_rms(out, rms);
  return out;
}

std::vector<double> tone_burst(std::size_t n, double f0, double peak, int rate, Rng& rng) {
  std::normal_distribution<double> white(0.0, 0.15);
  std::vector<double> x(n);
  const double w = kTwoPi * f0 / rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    const double env = n > 1 ? 0.5 - 0.5 * std::cos(kTwoPi * t / static_cast<double>(n - 1)) : 1.0;
    const double s = std::sin(w * t) + 0.5 * std::sin(2 * w * t) + 0.25 * std::sin(3 * w * t) + white(rng);
    x[i] = env * s;
  }
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, std::abs(v));
  if (mx > 0) {
    for (double& v : x) v *= peak / mx;
  }
  return x;
}

SynthRecording detector_recording(std::size_t frames, std::size_t bursts,
                                  const DetectorCorpusOptions& options, Rng& rng) {
  const int rate = dsp::kTargetRateHz;
  const dsp::FrameSpec det = dsp::detection_frame_spec(rate);
  if (frames == 0) throw InputError("synth: a recording needs at least one detection frame");
  const std::size_t n = (frames - 1) * det.hop_samples + det.frame_len_samples;

  SynthRecording out;
  auto& rec = out.recording;
  rec.audio.sample_rate_hz = rate;
  rec.audio.samples =
      pink_noise(n, uniform(rng, options.background_rms_min, options.background_rms_max), rng);

  // burst centres sit on detection-frame centres, at least min spacing apart
  std::vector<std::size_t> centers;
  std::vector<std::size_t> candidates(frames);
  for (std::size_t k = 0; k < frames; ++k) candidates[k] = k;
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t k : candidates) {
    if (centers.size() >= bursts) break;
    const bool clear = std::all_of(centers.begin(), centers.end(), [&](std::size_t c) {
      return (c > k ? c - k : k - c) >= options.min_burst_spacing_frames;
    });
    if (clear) centers.push_back(k);
  }
  std::sort(centers.begin(), centers.end());

  for (std::size_t k : centers) {
    const double dur = uniform(rng, options.burst_min_s, options.burst_max_s);
    const auto len = static_cast<std::size_t>(dur * rate);
    const std::size_t mid = k * det.hop_samples + det.frame_len_samples / 2;
    const std::size_t start = mid - std::min(mid, len / 2);
    const std::size_t end = std::min(n, start + len);
    const auto burst = tone_burst(end - start, uniform(rng, 250.0, 900.0),
                                  uniform(rng, options.burst_peak_min, options.burst_peak_max), rate, rng);
    for (std::size_t i = start; i < end; ++i) rec.audio.samples[i] += burst[i - start];
    out.bursts.push_back({static_cast<double>(start) / rate, static_cast<double>(end) / rate});
  }

  rec.frame_labels.assign(frames, 0);
  for (std::size_t k = 0; k < frames; ++k) {
    const double f0 = static_cast<double>(k * det.hop_samples) / rate;
    const double f1 = f0 + static_cast<double>(det.frame_len_samples) / rate;
    for (const auto& b : out.bursts) {
      const double overlap = std::min(f1, b.end_s) - std::max(f0, b.start_s);
      if (overlap >= options.min_overlap_s) rec.frame_labels[k] = 1;
    }
  }
  return out;
}

std::vector<SynthRecording> detector_corpus(const DetectorCorpusOptions& options,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SynthRecording> out;
  out.reserve(options.recordings);
  for (std::size_t r = 0; r < options.recordings; ++r) {
    const std::size_t bursts =
        std::uniform_int_distribution<std::size_t>(0, options.max_bursts)(rng);
    auto rec = detector_recording(options.frames_per_recording, bursts, options, rng);
    char name[32];
    std::snprintf(name, sizeof name, "det_%03zu", r);
    rec.recording.name = name;
    out.push_back(std::move(rec));
  }
  return out;
}

const std::vector<std::string>& sound_class_names() {
  static const std::vector<std::string> names = {"harmonic", "band", "chirp", "tone", "am_noise"};
  return names;
}

dsp::AudioBuffer sound_clip(std::size_t class_id, double duration_s, Rng& rng) {
  if (class_id >= kNumSoundClasses) throw InputError("synth: unknown sound class");
  const int rate = dsp::kTargetRateHz;
  const auto n = static_cast<std::size_t>(duration_s * rate);
  std::vector<double> x(n, 0.0);
  switch (class_id) {
    case 0: {
      const double f0 = uniform(rng, 150.0, 250.0);
      for (int h = 1; h <= 5; ++h) {
        const double phase = uniform(rng, 0.0, kTwoPi);
        for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(kTwoPi * f0 * h * i / rate + phase) / h;
      }
      break;
    }
    case 1:
      x = band_noise(n, 2000.0, 4000.0, rate, rng);
      break;
    case 2: {
      const double fa = uniform(rng, 400.0, 600.0), fb = uniform(rng, 2800.0, 3200.0);
      const double dur = static_cast<double>(n) / rate;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] = std::sin(kTwoPi * (fa * t + 0.5 * (fb - fa) / dur * t * t));
      }
      break;
    }
    case 3: {
      const double f = uniform(rng, 1450.0, 1550.0);
      const double phase = uniform(rng, 0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(kTwoPi * f * i / rate + phase);
      break;
    }
    default: {
      x = band_noise(n, 5000.0, 7000.0, rate, rng);
      const double fm = uniform(rng, 4.0, 8.0);
      const double phase = uniform(rng, 0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) x[i] *= 0.6 + 0.4 * std::sin(kTwoPi * fm * i / rate + phase);
      break;
    }
  }
  scale_to_rms(x, uniform(rng, 0.05, 0.2));
  const auto bg = pink_noise(n, 0.005, rng);
  dsp::AudioBuffer out;
  out.sample_rate_hz = rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = x[i] + bg[i];
  return out;
}

}  // namespace coughsense::synth

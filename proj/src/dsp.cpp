// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/dsp.hpp"

#include <cmath>
#include <numbers>

#include "coughsense/error.hpp"

namespace coughsense::dsp {

void FrameSpec::validate() const {
  if (frame_len_samples == 0 || hop_samples == 0) {
    throw InputError("frame spec: frame length and hop must be positive");
  }
  if (hop_samples > frame_len_samples) {
    throw InputError("frame spec: hop must not exceed frame length");
  }
}

FrameSpec detection_frame_spec(int sample_rate_hz) {
  const auto len = static_cast<std::size_t>(std::lround(0.320 * sample_rate_hz));
  return FrameSpec{len, len / 2, Window::Rectangular};
}

FrameSpec feature_frame_spec() { return FrameSpec{1024, 512, Window::Hamming}; }

std::vector<double> window_coefficients(Window window, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (window == Window::Hamming && n > 1) {
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    }
  }
  return w;
}

std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec) {
  spec.validate();
  if (num_samples < spec.frame_len_samples) return 0;
  return (num_samples - spec.frame_len_samples) / spec.hop_samples + 1;
}

std::vector<std::vector<double>> frame_signal(std::span<const double> samples,
                                              const FrameSpec& spec) {
  const std::size_t count = frame_count(samples.size(), spec);
  if (count == 0) {
    throw InputError("input too short: " + std::to_string(samples.size()) +
                     " samples, need at least " + std::to_string(spec.frame_len_samples));
  }
  const auto w = window_coefficients(spec.window, spec.frame_len_samples);
  std::vector<std::vector<double>> frames(count, std::vector<double>(spec.frame_len_samples));
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t offset = k * spec.hop_samples;
    for (std::size_t n = 0; n < spec.frame_len_samples; ++n) {
      frames[k][n] = samples[offset + n] * w[n];
    }
  }
  return frames;
}

std::vector<std::vector<double>> frame_signal(const AudioBuffer& buffer, const FrameSpec& spec) {
  return frame_signal(std::span<const double>(buffer.samples), spec);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw InputError("fft: length " + std::to_string(n) + " is not a power of two");
  }
  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // direct twiddle evaluation keeps the error flat for large N
      const std::complex<double> w(std::cos(angle * static_cast<double>(k)),
                                   std::sin(angle * static_cast<double>(k)));
      for (std::size_t i = 0; i < n; i += len) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + half] * w;
        x[i + k] = u + v;
        x[i + k + half] = u - v;
      }
    }
  }
}

std::vector<double> fft_magnitude(std::span<const double> frame) {
  if (!is_power_of_two(frame.size())) {
    throw InputError("fft_magnitude: frame length " + std::to_string(frame.size()) +
                     " is not a power of two");
  }
  std::vector<std::complex<double>> x(frame.begin(), frame.end());
  fft_inplace(x);
  std::vector<double> mag(frame.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(x[k]);
  return mag;
}

std::vector<double> padded_fft_magnitude(std::span<const double> frame) {
  if (is_power_of_two(frame.size())) return fft_magnitude(frame);
  std::vector<double> padded(next_power_of_two(frame.size()), 0.0);
  std::copy(frame.begin(), frame.end(), padded.begin());
  return fft_magnitude(padded);
}

namespace {

double frame_std(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(x.size()));
}

}  // namespace

std::vector<bool> voiced_frames(const AudioBuffer& buffer, const FrameSpec& spec,
                                double threshold_ratio) {
  if (!(threshold_ratio > 0.0)) {
    throw InputError("silence threshold ratio must be positive");
  }
  const std::size_t count = frame_count(buffer.size(), spec);
  std::vector<double> stds(count);
  double mean_std = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    stds[k] = frame_std(std::span<const double>(buffer.samples)
                            .subspan(k * spec.hop_samples, spec.frame_len_samples));
    mean_std += stds[k];
  }
  if (count > 0) mean_std /= static_cast<double>(count);
  const double threshold = threshold_ratio * mean_std;
  std::vector<bool> voiced(count);
  for (std::size_t k = 0; k < count; ++k) voiced[k] = !(stds[k] < threshold) && stds[k] > 0.0;
  return voiced;
}

std::vector<Region> remove_silence(const AudioBuffer& buffer, const FrameSpec& spec,
                                   double threshold_ratio) {
  const std::vector<bool> voiced_mask = voiced_frames(buffer, spec, threshold_ratio);
  const std::size_t count = voiced_mask.size();

  std::vector<Region> regions;
  bool open = false;
  for (std::size_t k = 0; k < count; ++k) {
    const bool voiced = voiced_mask[k];
    const std::size_t start = k * spec.hop_samples;
    const std::size_t end = start + spec.frame_len_samples;
    if (voiced) {
      if (open) {
        regions.back().end_sample = end;
      } else {
        regions.push_back({start, end});
        open = true;
      }
    } else {
      open = false;
    }
  }
  // overlapping frames can make neighbouring regions touch; merge them
  std::vector<Region> merged;
  for (const Region& r : regions) {
    if (!merged.empty() && r.start_sample <= merged.back().end_sample) {
      merged.back().end_sample = std::max(merged.back().end_sample, r.end_sample);
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

AudioBuffer extract_regions(const AudioBuffer& buffer, const std::vector<Region>& regions) {
  AudioBuffer out;
  out.sample_rate_hz = buffer.sample_rate_hz;
  for (const Region& r : regions) {
    const std::size_t end = std::min(r.end_sample, buffer.size());
    if (r.start_sample >= end) continue;
    out.samples.insert(out.samples.end(),
                       buffer.samples.begin() + static_cast<std::ptrdiff_t>(r.start_sample),
                       buffer.samples.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace coughsense::dsp

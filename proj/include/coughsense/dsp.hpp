// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "coughsense/audio.hpp"

namespace coughsense::dsp {

enum class Window { Hamming, Rectangular };

struct FrameSpec {
  std::size_t frame_len_samples = 1024;
  std::size_t hop_samples = 512;
  Window window = Window::Hamming;

  /// Throws InputError unless 0 < hop <= frame_len.
  void validate() const;

  bool operator==(const FrameSpec&) const = default;
};

/// 320 ms frames with 50% overlap, used for detection decisions and silence
/// removal. 5120 / 2560 samples at 16 kHz.
FrameSpec detection_frame_spec(int sample_rate_hz = kTargetRateHz);

/// 1024-sample Hamming frames with 50% overlap, used for features and
/// spectrograms.
FrameSpec feature_frame_spec();

/// Symmetric Hamming: w[n] = 0.54 - 0.46 cos(2 pi n / (N-1)).
std::vector<double> window_coefficients(Window window, std::size_t n);

/// Number of complete frames; a trailing partial frame is dropped.
std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec);

/// Frame k covers samples [k*hop, k*hop + frame_len), multiplied by the
/// window. Throws InputError("input too short") when fewer than one frame.
std::vector<std::vector<double>> frame_signal(std::span<const double> samples,
                                              const FrameSpec& spec);
std::vector<std::vector<double>> frame_signal(const AudioBuffer& buffer,
                                              const FrameSpec& spec);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 decimation-in-time FFT (forward, unnormalized).
/// Throws InputError when the length is not a power of two.
void fft_inplace(std::vector<std::complex<double>>& x);

/// |X[k]| for k = 0..N/2. N must be a power of two; callers zero-pad.
std::vector<double> fft_magnitude(std::span<const double> frame);

/// Zero-pads `frame` to the next power of two and returns its magnitudes.
std::vector<double> padded_fft_magnitude(std::span<const double> frame);

/// Half-open sample range [start_sample, end_sample).
struct Region {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
  bool operator==(const Region&) const = default;
};

/// Per-frame voicing decision: a frame is silent when its standard deviation
/// is zero or below `threshold_ratio` times the mean frame standard deviation.
std::vector<bool> voiced_frames(const AudioBuffer& buffer, const FrameSpec& spec,
                                double threshold_ratio = 0.5);

/// Frames whose standard deviation is below `threshold_ratio` times the mean
/// frame standard deviation are silent. Consecutive voiced frames merge into
/// one region. Frames are taken unwindowed regardless of spec.window.
std::vector<Region> remove_silence(const AudioBuffer& buffer, const FrameSpec& spec,
                                   double threshold_ratio = 0.5);

/// Concatenates the samples covered by `regions`.
AudioBuffer extract_regions(const AudioBuffer& buffer, const std::vector<Region>& regions);

}  // namespace coughsense::dsp

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace coughsense::dsp {

/// Every recording is brought to this rate before framing.
inline constexpr int kTargetRateHz = 16000;

/// Mono PCM signal, amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate_hz = kTargetRateHz;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }

  /// Throws InputError when the rate is not positive or a sample is not finite.
  void validate() const;
};

/// Resamples to `target_rate_hz`. Downsampling runs a Blackman-windowed sinc
/// low-pass (cutoff 0.45 * target rate) before linear interpolation; the
/// output has floor(n * target / source) samples.
AudioBuffer resample(const AudioBuffer& buffer, int target_rate_hz);

/// RIFF/WAVE reader. Accepts 16-bit signed PCM, mono or multi-channel (the
/// first channel is kept). `name` is used in error messages.
AudioBuffer read_wav(std::istream& in, const std::string& name);
AudioBuffer read_wav(const std::string& path);

/// Reads a WAV file and resamples it to kTargetRateHz.
AudioBuffer load_audio(const std::string& path);

/// Writes 16-bit mono PCM. Samples are clipped to [-1, 1].
void write_wav(std::ostream& out, const AudioBuffer& buffer);
void write_wav(const std::string& path, const AudioBuffer& buffer);

}  // namespace coughsense::dsp

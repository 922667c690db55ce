// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "coughsense/audio.hpp"
#include "coughsense/dsp.hpp"

namespace coughsense::dsp {

inline constexpr std::size_t kMfccFrameLen = 1024;
inline constexpr std::size_t kNumMelFilters = 26;
inline constexpr std::size_t kNumCepstra = 12;           // c0..c11
inline constexpr std::size_t kNumMfccWithDeltas = 36;    // static + delta + delta-delta
inline constexpr std::size_t kFeatureDim = 39;           // + zcr, crest, energy
inline constexpr double kMelMaxHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;

using Cepstrum = std::array<double, kNumCepstra>;
using CepstrumWithDeltas = std::array<double, kNumMfccWithDeltas>;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular mel filterbank on FFT bins. Filter m rises linearly from edge
/// m to edge m+1 and falls to edge m+2, where the 28 edges are equally spaced
/// on the mel scale between 0 Hz and min(8000, fs/2).
class MelFilterbank {
 public:
  MelFilterbank(std::size_t fft_len, int sample_rate_hz);

  /// Sum over bins of power * weight, one value per filter.
  std::array<double, kNumMelFilters> apply(std::span<const double> power) const;

  double weight(std::size_t filter, std::size_t bin) const {
    return weights_[filter * num_bins_ + bin];
  }
  std::size_t num_bins() const { return num_bins_; }

 private:
  std::size_t num_bins_;
  std::vector<double> weights_;
};

/// Orthonormal DCT-II of a log filterbank vector, first 12 coefficients.
Cepstrum dct_cepstrum(const std::array<double, kNumMelFilters>& log_energies);

/// MFCC of one windowed frame: |FFT|^2 -> mel filterbank -> log(max(e, 1e-10))
/// -> orthonormal DCT-II. Frames shorter than 1024 are zero-padded; longer
/// frames are rejected.
Cepstrum mfcc(std::span<const double> windowed_frame, int sample_rate_hz);

/// Static + symmetric-difference deltas + delta-deltas with edge replication.
/// Tracks shorter than three frames get zero deltas.
std::vector<CepstrumWithDeltas> mfcc_deltas(const std::vector<Cepstrum>& track);

/// Fraction of adjacent sample pairs with s[t] * s[t-1] < 0.
double zero_crossing_rate(std::span<const double> frame);

/// Peak absolute value over RMS; 0 for an all-zero frame.
double crest_factor(std::span<const double> frame);

/// RMS of the frame.
double energy(std::span<const double> frame);

struct FrameFeatures {
  std::size_t index = 0;
  double start_time_s = 0.0;
  CepstrumWithDeltas mfcc{};
  double zcr = 0.0;
  double crest_factor = 0.0;
  double energy = 0.0;

  /// 36 MFCC values followed by zcr, crest factor, energy.
  std::array<double, kFeatureDim> as_array() const;
};

/// Runs the sub-frame feature pipeline (1024-sample Hamming frames, 50%
/// overlap). Time-domain scalars use the unwindowed frame. Throws
/// InputError when the buffer holds less than one frame.
std::vector<FrameFeatures> extract_features(const AudioBuffer& buffer,
                                            const FrameSpec& spec = feature_frame_spec());

/// Log-magnitude spectrogram, row-major D_freq x T.
struct Spectrogram {
  std::size_t d_freq = 0;
  std::size_t frames = 0;
  std::vector<double> data;
  FrameSpec frame_spec;
  double origin_time_s = 0.0;

  double at(std::size_t f, std::size_t t) const { return data[f * frames + t]; }
  double& at(std::size_t f, std::size_t t) { return data[f * frames + t]; }
};

/// Column t = log(|FFT(frame t)| + 1e-10); frames are zero-padded to the next
/// power of two, so D_freq = padded_len / 2 + 1.
Spectrogram spectrogram(const AudioBuffer& buffer, const FrameSpec& spec = feature_frame_spec(),
                        double origin_time_s = 0.0);

/// Text dump: one row per sub-frame,
/// `frame_index,start_time_s,mfcc_0..mfcc_35,zcr,crest,energy`.
void write_feature_dump(std::ostream& out, const std::vector<FrameFeatures>& features);
std::vector<FrameFeatures> read_feature_dump(std::istream& in);

/// Spectrogram text dump: a `# spectrogram` header line, then one row per
/// time frame holding D_freq comma-separated values.
void write_spectrogram(std::ostream& out, const Spectrogram& spec);
Spectrogram read_spectrogram(std::istream& in, const std::string& name);

}  // namespace coughsense::dsp

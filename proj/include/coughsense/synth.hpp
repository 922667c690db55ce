// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coughsense/audio.hpp"
#include "coughsense/detector/detector.hpp"

namespace coughsense::synth {

using Rng = std::mt19937_64;

/// Gaussian white noise through Kellet's pink filter, scaled to `rms`.
std::vector<double> pink_noise(std::size_t n, double rms, Rng& rng);

/// Hann-windowed harmonic tone burst: fundamental plus two weaker
/// harmonics and a little broadband noise, peak amplitude `peak`.
std::vector<double> tone_burst(std::size_t n, double f0, double peak, int rate, Rng& rng);

struct DetectorCorpusOptions {
  std::size_t recordings = 50;
  std::size_t frames_per_recording = 20;
  std::size_t max_bursts = 5;
  std::size_t min_burst_spacing_frames = 4;
  double burst_min_s = 0.10;
  double burst_max_s = 0.18;
  double background_rms_min = 0.01;
  double background_rms_max = 0.03;
  double burst_peak_min = 0.2;
  double burst_peak_max = 0.5;
  /// A detection frame is labeled cough when it overlaps a burst by this much.
  double min_overlap_s = 0.04;
};

struct PlantedBurst {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SynthRecording {
  detector::LabeledRecording recording;
  std::vector<PlantedBurst> bursts;
};

/// One recording: pink-noise background with tone bursts centred on
/// detection-frame centres, plus its per-frame label track.
SynthRecording detector_recording(std::size_t frames, std::size_t bursts,
                                  const DetectorCorpusOptions& options, Rng& rng);

std::vector<SynthRecording> detector_corpus(const DetectorCorpusOptions& options,
                                            std::uint64_t seed);

inline constexpr std::size_t kNumSoundClasses = 5;

/// Names of the synthetic sound classes, indexed by class id.
const std::vector<std::string>& sound_class_names();

/// A clip of class `class_id` (0..4) lasting `duration_s`:
///   0 harmonic  low harmonic tone (f0 150-250 Hz)
///   1 band      noise confined to 2-4 kHz
///   2 chirp     linear sweep upward from ~500 Hz to ~3 kHz
///   3 tone      steady tone near 1500 Hz
///   4 am_noise  5-7 kHz noise, amplitude modulated at 4-8 Hz
dsp::AudioBuffer sound_clip(std::size_t class_id, double duration_s, Rng& rng);

}  // namespace coughsense::synth

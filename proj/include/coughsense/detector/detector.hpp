// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coughsense/audio.hpp"
#include "coughsense/detector/svm.hpp"
#include "coughsense/dsp.hpp"
#include "coughsense/features.hpp"
#include "coughsense/nn/layers.hpp"
#include "coughsense/nn/optim.hpp"

namespace coughsense::detector {

inline constexpr std::size_t kDefaultContext = 16;
/// Feature rows are zero-padded from 39 to a multiple of 16.
inline constexpr std::size_t kMapHeight = 48;
inline constexpr std::size_t kNumBlocks = 4;
inline constexpr std::array<std::size_t, kNumBlocks> kBlockChannels = {16, 32, 64, 128};
inline constexpr std::size_t kFusedDim = 240;

/// Per-dimension feature standardization fitted on training sub-frames.
struct Standardizer {
  std::array<double, dsp::kFeatureDim> mean{};
  std::array<double, dsp::kFeatureDim> std{};

  /// Population statistics over every sub-frame of every recording. A
  /// constant dimension gets std 1.
  static Standardizer fit(const std::vector<std::vector<dsp::FrameFeatures>>& recordings);
  static Standardizer identity();
  std::array<double, dsp::kFeatureDim> apply(const dsp::FrameFeatures& f) const;
};

/// Sub-frame at the centre of detection frame `k`: detection frames hop by
/// five sub-frames and the fifth sub-frame of a frame is centred on it.
std::size_t center_subframe(std::size_t detection_frame);

/// [1, 39, context] map of standardized features, columns
/// center - context/2 .. center + context/2 - 1, indices clamped to the
/// recording (edge replication). Throws InputError on empty features or a
/// context that is odd or below 4.
nn::Tensor build_frame_map(const std::vector<dsp::FrameFeatures>& features, std::size_t center,
                           std::size_t context, const Standardizer& standardizer);

/// Stacks [1, 39, W] maps into a [N, 1, 48, W'] batch, zero-padding height to
/// 48 and width to a multiple of 16.
nn::Tensor batch_maps(const std::vector<const nn::Tensor*>& maps);

/// Four conv blocks (16/32/64/128 channels, 2x2 pooling) whose outputs are
/// upsampled to block-1 resolution, concatenated and globally averaged into a
/// 240-d vector. The logistic head is used only while training the CNN.
class DetectorNet {
 public:
  explicit DetectorNet(std::uint64_t seed = 0);

  /// [N, 1, H, W] with H, W divisible by 16 -> [N, 240].
  nn::Var fused(const nn::Var& batch, nn::Mode mode);
  nn::Var fused_frozen(const nn::Var& batch) const;
  /// [N, 240] -> [N, 1]
  nn::Var aux_logits(const nn::Var& fused) const { return aux_head.forward(fused); }

  /// Built on each call so it always points at this object's members.
  nn::ParamRegistry registry();

  std::array<nn::ConvBlock, kNumBlocks> blocks;
  nn::Linear aux_head;

 private:
  nn::Var fuse(const std::vector<nn::Var>& outputs) const;
};

/// Inference-mode 240-d feature of one [1, 39, W] map.
std::vector<double> multi_scale_forward(const DetectorNet& net, const nn::Tensor& map);

struct CoughEvent {
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;  // inclusive
  dsp::Spectrogram segment_spectrogram;
  double peak_score = 0.0;

  double duration_s() const { return end_s - start_s; }
};

/// Maximal runs that start and end on a positive label and contain no more
/// than `gap_tolerance` consecutive negatives. Inclusive frame ranges.
std::vector<std::pair<std::size_t, std::size_t>> segment_runs(const std::vector<bool>& labels,
                                                              std::size_t gap_tolerance = 1);

/// Builds events from the runs of `labels`. Each event spans its frames'
/// samples and carries the spectrogram of exactly that span.
std::vector<CoughEvent> segment_events(const std::vector<bool>& labels,
                                       const std::vector<double>& scores,
                                       const dsp::AudioBuffer& audio,
                                       const dsp::FrameSpec& detection_spec,
                                       std::size_t gap_tolerance = 1);

struct DetectorConfig {
  std::size_t context = kDefaultContext;
  std::size_t batch_size = 16;
  nn::OptimizerState optimizer;  // max_epochs is the epoch count
  double svm_C = 1.0;
  double svm_gamma = 0.0;  // <= 0 selects default_gamma
  double svm_tolerance = 1e-5;
  std::size_t gap_tolerance = 1;
  double silence_ratio = 0.5;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
};

/// One labeled detection frame: its feature map and 0/1 label.
struct FrameExample {
  nn::Tensor map;
  int label = 0;
};

struct LabeledRecording {
  std::string name;
  dsp::AudioBuffer audio;
  std::vector<int> frame_labels;  // one 0/1 per detection frame
};

/// A trained detector: standardizer, CNN and SVM.
struct DetectorModel {
  DetectorNet net;
  Standardizer standardizer;
  SvmModel svm;
  std::size_t context = kDefaultContext;

  void save(const std::string& path) const;
  static DetectorModel load(const std::string& path);
  std::string encode() const;
  static DetectorModel decode(const std::string& bytes);
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<EpochLog> epochs;
  std::size_t support_vectors = 0;
  std::size_t smo_iterations = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Maps and labels for every detection frame of every recording. Throws
/// InputError when a label track does not match the recording's frame count.
std::vector<FrameExample> frame_examples(const std::vector<LabeledRecording>& corpus,
                                         const std::vector<std::vector<dsp::FrameFeatures>>& features,
                                         const Standardizer& standardizer, std::size_t context);

/// Mean logistic loss over `examples` with batch statistics, leaving the
/// running statistics untouched.
double aux_loss(DetectorNet& net, const std::vector<FrameExample>& examples,
                std::size_t batch_size);

/// Stage 1: CNN with the logistic head. Stage 2: frozen CNN features into an
/// SMO-trained SVM. Throws InputError when no example is positive or none
/// negative.
DetectorModel train_detector_on_frames(const std::vector<FrameExample>& examples,
                                       const Standardizer& standardizer,
                                       const DetectorConfig& config, TrainingReport* report = nullptr,
                                       const EpochCallback& on_epoch = {});

/// Extracts features, fits the standardizer and trains on every frame.
DetectorModel train_detector(const std::vector<LabeledRecording>& corpus,
                             const DetectorConfig& config, TrainingReport* report = nullptr,
                             const EpochCallback& on_epoch = {});

struct DetectionResult {
  std::vector<double> scores;  // SVM decision value per detection frame
  std::vector<bool> voiced;
  std::vector<bool> labels;  // cough iff voiced and score > 0
  std::vector<CoughEvent> events;
  std::vector<double> frame_latency_ms;  // filled when timing is requested
};

struct DetectOptions {
  std::size_t gap_tolerance = 1;
  double silence_ratio = 0.5;
  bool timing = false;
};

/// Labels every detection frame of `audio` (16 kHz) and segments the cough
/// runs. Recordings shorter than one detection frame produce no frames.
DetectionResult detect(const DetectorModel& model, const dsp::AudioBuffer& audio,
                       const DetectOptions& options = {});

/// Inference-mode fused features of a set of examples, in order.
FeatureMatrix fused_features(const DetectorNet& net, const std::vector<FrameExample>& examples);

}  // namespace coughsense::detector

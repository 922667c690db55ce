// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coughsense/features.hpp"
#include "coughsense/nn/layers.hpp"
#include "coughsense/nn/optim.hpp"

namespace coughsense::fewshot {

inline constexpr std::size_t kEmbedDim = 128;
inline constexpr std::size_t kNumBlocks = 4;
inline constexpr std::array<std::size_t, kNumBlocks> kBlockChannels = {16, 32, 64, 128};
/// Frequency-axis pooling per block; time is never pooled.
inline constexpr std::size_t kFreqPool = 4;
inline constexpr std::size_t kAttentionHidden = 32;
/// Embedding columns are rescaled to this L2 norm.
inline constexpr double kDefaultColumnNorm = 4.0;

/// A D x T embedding (row-major) and its attention over T.
struct Embedding {
  std::size_t d = 0;
  std::size_t t = 0;
  std::vector<double> x;          // x[r * t + c]
  std::vector<double> attention;  // length t, sums to 1
};

/// Sum over t, u of a_i(t) a_j(u) <X_i[:, t], X_j[:, u]>. Throws ShapeError
/// when the channel counts differ or an attention length does not match T.
double attentional_similarity(std::span<const double> xi, std::size_t ti,
                              std::span<const double> ai, std::span<const double> xj,
                              std::size_t tj, std::span<const double> aj, std::size_t d);
double attentional_similarity(const Embedding& a, const Embedding& b);

/// Differentiable form over X [D, T] and A [T].
nn::Var attentional_similarity(const nn::Var& xi, const nn::Var& ai, const nn::Var& xj,
                               const nn::Var& aj);

/// Log-magnitude spectrogram standardized to zero mean, unit variance, as a
/// [1, 1, D_freq, T] tensor.
nn::Tensor spectrogram_input(const dsp::Spectrogram& spec);

/// Conv blocks pooling only frequency, then a mean over the remaining
/// frequency bins and per-column rescaling to `column_norm`.
class EmbeddingNet {
 public:
  explicit EmbeddingNet(std::uint64_t seed = 0, double column_norm = kDefaultColumnNorm);

  /// [N, 1, F, T] -> N embeddings of shape [128, T].
  std::vector<nn::Var> forward(const nn::Var& batch, nn::Mode mode);
  std::vector<nn::Var> forward_frozen(const nn::Var& batch) const;
  void register_params(nn::ParamRegistry& reg);

  std::array<nn::ConvBlock, kNumBlocks> blocks;
  double column_norm = kDefaultColumnNorm;

 private:
  std::vector<nn::Var> finish(const nn::Var& pooled) const;
};

/// 1x3 conv 128 -> 32, ReLU, 1x3 conv 32 -> 1, softmax over time.
class AttentionNet {
 public:
  explicit AttentionNet(std::uint64_t seed = 1);

  /// [128, T] -> [T]
  nn::Var forward(const nn::Var& embedding) const;
  void register_params(nn::ParamRegistry& reg);

  nn::Conv2d hidden;
  nn::Conv2d out;
};

struct FewShotModel {
  EmbeddingNet embed;
  AttentionNet attend;

  /// Parameters and buffers of both nets. Built on each call.
  nn::ParamRegistry registry();
  /// Inference-mode embedding plus attention for one spectrogram.
  Embedding embed_spectrogram(const dsp::Spectrogram& spec) const;

  void save(const std::string& path) const;
  static FewShotModel load(const std::string& path);
  std::string encode() const;
  static FewShotModel decode(const std::string& bytes);
};

FewShotModel make_model(std::uint64_t seed, double column_norm = kDefaultColumnNorm);

/// Labeled spectrogram collection. labels[i] indexes class_names.
struct Dataset {
  std::vector<std::string> class_names;
  std::vector<dsp::Spectrogram> items;
  std::vector<std::size_t> labels;

  /// Item ids per class.
  std::vector<std::vector<std::size_t>> members() const;
  /// Only the listed classes, relabeled 0..n-1 in the given order.
  Dataset subset(const std::vector<std::size_t>& classes) const;
};

struct EpisodeSpec {
  std::size_t c = 0;
  std::size_t k = 0;
  std::vector<std::size_t> classes;               // dataset class ids, episode order
  std::vector<std::vector<std::size_t>> support;  // [c][k] item ids
  std::size_t query = 0;                          // item id
  std::size_t query_class = 0;                    // index into classes
};

/// c classes drawn without replacement, k support items from each, and one
/// query from the remaining items of a uniformly chosen episode class. Every
/// class of the dataset must have at least k + 1 items; the error names the
/// first that does not.
EpisodeSpec sample_episode(const Dataset& data, std::size_t c, std::size_t k, std::mt19937_64& rng);

struct ClassScores {
  std::vector<double> similarity;
  std::vector<double> probability;  // softmax of similarity

  /// Highest probability; ties go to the lowest index.
  std::size_t argmax() const;
};

std::vector<double> softmax(const std::vector<double>& scores);

/// Score of each class is the mean attentional similarity between the query
/// and that class's support embeddings. Throws InputError for an empty class.
ClassScores class_scores(const Embedding& query,
                         const std::vector<std::vector<Embedding>>& support);

struct FewShotConfig {
  std::size_t c = 3;
  std::size_t k = 5;
  std::size_t episodes_per_step = 4;
  std::size_t steps_per_epoch = 10;
  nn::OptimizerState optimizer;  // max_epochs is the epoch count
  double column_norm = kDefaultColumnNorm;
  std::uint64_t seed = 0;
};

struct StepLog {
  int epoch = 0;
  std::size_t step = 0;  // global step index
  double learning_rate = 0.0;
  double loss = 0.0;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Episodic training with cross-entropy on the query's class probabilities,
/// `episodes_per_step` episodes averaged per SGD step.
FewShotModel train_fewshot(const Dataset& data, const FewShotConfig& config,
                           std::vector<StepLog>* log = nullptr, const StepCallback& on_step = {});

/// Deployment-time exemplars per class.
struct SupportBank {
  std::vector<std::string> class_names;
  std::vector<std::vector<Embedding>> exemplars;

  static SupportBank build(const FewShotModel& model, const Dataset& data);
};

struct Classification {
  std::size_t predicted = 0;
  std::string class_name;
  ClassScores scores;
};

Classification classify_event(const dsp::Spectrogram& event, const SupportBank& bank,
                              const FewShotModel& model);
Classification classify_embedding(const Embedding& query, const SupportBank& bank);

}  // namespace coughsense::fewshot

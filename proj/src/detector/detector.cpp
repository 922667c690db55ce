// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/detector/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "coughsense/error.hpp"
#include "coughsense/nn/ops.hpp"
#include "coughsense/nn/serialize.hpp"

namespace coughsense::detector {

using dsp::kFeatureDim;
using nn::Mode;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::size_t kSubframesPerDetectionHop = 5;
constexpr std::size_t kSizeMultiple = 16;

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

}  // namespace

Standardizer Standardizer::fit(const std::vector<std::vector<dsp::FrameFeatures>>& recordings) {
  std::array<double, kFeatureDim> sum{}, sq{};
  std::size_t count = 0;
  for (const auto& rec : recordings) {
    for (const auto& f : rec) {
      const auto v = f.as_array();
      for (std::size_t d = 0; d < kFeatureDim; ++d) sum[d] += v[d];
      ++count;
    }
  }
  if (count == 0) throw InputError("standardizer: no feature frames to fit");
  Standardizer s;
  for (std::size_t d = 0; d < kFeatureDim; ++d) s.mean[d] = sum[d] / static_cast<double>(count);
  for (const auto& rec : recordings) {
    for (const auto& f : rec) {
      const auto v = f.as_array();
      for (std::size_t d = 0; d < kFeatureDim; ++d) sq[d] += (v[d] - s.mean[d]) * (v[d] - s.mean[d]);
    }
  }
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    const double sd = std::sqrt(sq[d] / static_cast<double>(count));
    s.std[d] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity() {
  Standardizer s;
  s.std.fill(1.0);
  return s;
}

std::array<double, kFeatureDim> Standardizer::apply(const dsp::FrameFeatures& f) const {
  auto v = f.as_array();
  for (std::size_t d = 0; d < kFeatureDim; ++d) v[d] = (v[d] - mean[d]) / std[d];
  return v;
}

std::size_t center_subframe(std::size_t detection_frame) {
  return kSubframesPerDetectionHop * detection_frame + kSubframesPerDetectionHop - 1;
}

Tensor build_frame_map(const std::vector<dsp::FrameFeatures>& features, std::size_t center,
                       std::size_t context, const Standardizer& standardizer) {
  if (features.empty()) throw InputError("build_frame_map: empty feature sequence");
  if (context < 4 || context % 2 != 0) {
    throw InputError("build_frame_map: context must be even and at least 4");
  }
  Tensor map({1, kFeatureDim, context});
  const long last = static_cast<long>(features.size()) - 1;
  for (std::size_t c = 0; c < context; ++c) {
    const long idx = std::clamp(static_cast<long>(center) - static_cast<long>(context / 2) +
                                    static_cast<long>(c),
                                0L, last);
    const auto v = standardizer.apply(features[static_cast<std::size_t>(idx)]);
    for (std::size_t d = 0; d < kFeatureDim; ++d) map[d * context + c] = v[d];
  }
  return map;
}

Tensor batch_maps(const std::vector<const Tensor*>& maps) {
  if (maps.empty()) throw ShapeError("batch_maps: no maps");
  std::size_t width = 0;
  for (const Tensor* m : maps) {
    if (m->rank() != 3 || m->dim(0) != 1 || m->dim(1) > kMapHeight) {
      throw ShapeError("batch_maps: expected [1, <=48, W], got " + nn::shape_string(m->shape()));
    }
    width = std::max(width, m->dim(2));
  }
  const std::size_t w_pad = round_up(width, kSizeMultiple);
  Tensor out({maps.size(), 1, kMapHeight, w_pad}, 0.0);
  for (std::size_t n = 0; n < maps.size(); ++n) {
    const Tensor& m = *maps[n];
    const std::size_t h = m.dim(1), w = m.dim(2);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        out[(n * kMapHeight + r) * w_pad + c] = m[r * w + c];
      }
    }
  }
  return out;
}

DetectorNet::DetectorNet(std::uint64_t seed) {
  nn::Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    blocks[b] = nn::ConvBlock("detector.block" + std::to_string(b + 1), in, kBlockChannels[b], 2, 2,
                              rng);
    in = kBlockChannels[b];
  }
  aux_head = nn::Linear("detector.aux_head", kFusedDim, 1, rng);
}

nn::ParamRegistry DetectorNet::registry() {
  nn::ParamRegistry reg;
  for (auto& b : blocks) b.register_params(reg);
  aux_head.register_params(reg);
  return reg;
}

Var DetectorNet::fuse(const std::vector<Var>& outputs) const {
  std::vector<Var> scaled;
  scaled.reserve(outputs.size());
  for (std::size_t b = 0; b < outputs.size(); ++b) {
    const std::size_t factor = std::size_t{1} << b;
    scaled.push_back(factor == 1 ? outputs[b] : nn::upsample_nearest(outputs[b], factor, factor));
  }
  const Var cat = nn::concat_channels(scaled);
  return nn::mean_axis(nn::mean_axis(cat, 3), 2);
}

Var DetectorNet::fused(const Var& batch, Mode mode) {
  const auto& s = batch.shape();
  if (s.size() != 4 || s[2] % kSizeMultiple != 0 || s[3] % kSizeMultiple != 0) {
    throw ShapeError("detector: input must be [N,1,H,W] with H, W divisible by 16, got " +
                     nn::shape_string(s));
  }
  std::vector<Var> outs;
  Var x = batch;
  for (auto& b : blocks) {
    x = b.forward(x, mode);
    outs.push_back(x);
  }
  return fuse(outs);
}

Var DetectorNet::fused_frozen(const Var& batch) const {
  const auto& s = batch.shape();
  if (s.size() != 4 || s[2] % kSizeMultiple != 0 || s[3] % kSizeMultiple != 0) {
    throw ShapeError("detector: input must be [N,1,H,W] with H, W divisible by 16, got " +
                     nn::shape_string(s));
  }
  std::vector<Var> outs;
  Var x = batch;
  for (const auto& b : blocks) {
    x = b.forward_frozen(x);
    outs.push_back(x);
  }
  return fuse(outs);
}

std::vector<double> multi_scale_forward(const DetectorNet& net, const Tensor& map) {
  nn::NoGradGuard guard;
  const Var out = net.fused_frozen(Var(batch_maps({&map})));
  return out.value().storage();
}

FeatureMatrix fused_features(const DetectorNet& net, const std::vector<FrameExample>& examples) {
  nn::NoGradGuard guard;
  FeatureMatrix out;
  out.reserve(examples.size());
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    std::vector<const Tensor*> maps;
    for (std::size_t i = start; i < std::min(examples.size(), start + kChunk); ++i) {
      maps.push_back(&examples[i].map);
    }
    const Tensor f = net.fused_frozen(Var(batch_maps(maps))).value();
    for (std::size_t n = 0; n < maps.size(); ++n) {
      out.emplace_back(f.data() + n * kFusedDim, f.data() + (n + 1) * kFusedDim);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_runs(const std::vector<bool>& labels,
                                                              std::size_t gap_tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  bool open = false;
  std::size_t start = 0, last_pos = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (!labels[k]) continue;
    if (open && k - last_pos - 1 <= gap_tolerance) {
      last_pos = k;
      continue;
    }
    if (open) runs.emplace_back(start, last_pos);
    open = true;
    start = last_pos = k;
  }
  if (open) runs.emplace_back(start, last_pos);
  return runs;
}

std::vector<CoughEvent> segment_events(const std::vector<bool>& labels,
                                       const std::vector<double>& scores,
                                       const dsp::AudioBuffer& audio,
                                       const dsp::FrameSpec& detection_spec,
                                       std::size_t gap_tolerance) {
  if (scores.size() != labels.size()) {
    throw ShapeError("segment_events: labels and scores differ in length");
  }
  std::vector<CoughEvent> events;
  const double rate = audio.sample_rate_hz;
  for (const auto& [first, last] : segment_runs(labels, gap_tolerance)) {
    CoughEvent e;
    e.first_frame = first;
    e.last_frame = last;
    const std::size_t s0 = first * detection_spec.hop_samples;
    const std::size_t s1 =
        std::min(audio.size(), last * detection_spec.hop_samples + detection_spec.frame_len_samples);
    e.start_s = static_cast<double>(s0) / rate;
    e.end_s = static_cast<double>(s1) / rate;
    e.peak_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k <= last; ++k) {
      if (labels[k]) e.peak_score = std::max(e.peak_score, scores[k]);
    }
    dsp::AudioBuffer slice;
    slice.sample_rate_hz = audio.sample_rate_hz;
    slice.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(s0),
                         audio.samples.begin() + static_cast<std::ptrdiff_t>(s1));
    e.segment_spectrogram = dsp::spectrogram(slice, dsp::feature_frame_spec(), e.start_s);
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<FrameExample> frame_examples(const std::vector<LabeledRecording>& corpus,
                                         const std::vector<std::vector<dsp::FrameFeatures>>& features,
                                         const Standardizer& standardizer, std::size_t context) {
  if (features.size() != corpus.size()) throw ShapeError("frame_examples: features per recording");
  std::vector<FrameExample> out;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& rec = corpus[r];
    const std::size_t frames =
        dsp::frame_count(rec.audio.size(), dsp::detection_frame_spec(rec.audio.sample_rate_hz));
    if (rec.frame_labels.size() != frames) {
      throw InputError(rec.name + ": label track has " + std::to_string(rec.frame_labels.size()) +
                       " entries but the recording has " + std::to_string(frames) +
                       " detection frames");
    }
    for (std::size_t k = 0; k < frames; ++k) {
      const std::size_t center = std::min(center_subframe(k), features[r].size() - 1);
      out.push_back({build_frame_map(features[r], center, context, standardizer),
                     rec.frame_labels[k] != 0 ? 1 : 0});
    }
  }
  return out;
}

namespace {

Tensor label_tensor(const std::vector<FrameExample>& ex, const std::vector<std::size_t>& idx) {
  Tensor t({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) t[i] = ex[idx[i]].label;
  return t;
}

Tensor batch_of(const std::vector<FrameExample>& ex, const std::vector<std::size_t>& idx) {
  std::vector<const Tensor*> maps;
  maps.reserve(idx.size());
  for (std::size_t i : idx) maps.push_back(&ex[i].map);
  return batch_maps(maps);
}

}  // namespace

double aux_loss(DetectorNet& net, const std::vector<FrameExample>& examples,
                std::size_t batch_size) {
  std::vector<nn::BatchNormStats> saved;
  for (const auto& b : net.blocks) saved.push_back(b.bn.stats);
  nn::NoGradGuard guard;
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) idx.push_back(i);
    const Var f = net.fused(Var(batch_of(examples, idx)), Mode::Train);
    const Var loss = nn::bce_with_logits(net.aux_logits(f), label_tensor(examples, idx));
    total += loss.value().item() * static_cast<double>(idx.size());
  }
  for (std::size_t b = 0; b < kNumBlocks; ++b) net.blocks[b].bn.stats = saved[b];
  return total / static_cast<double>(examples.size());
}

DetectorModel train_detector_on_frames(const std::vector<FrameExample>& examples,
                                       const Standardizer& standardizer,
                                       const DetectorConfig& config, TrainingReport* report,
                                       const EpochCallback& on_epoch) {
  std::size_t positives = 0;
  for (const auto& e : examples) positives += e.label != 0;
  if (positives == 0) throw InputError("train_detector: corpus has no positive (cough) frames");
  if (positives == examples.size()) {
    throw InputError("train_detector: corpus has no negative (non-cough) frames");
  }
  if (config.batch_size == 0) throw InputError("train_detector: batch size must be positive");

  DetectorModel model{DetectorNet(config.seed), standardizer, {}, config.context};
  DetectorNet& net = model.net;
  nn::ParamRegistry reg = net.registry();
  nn::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainingReport local;
  TrainingReport& rep = report ? *report : local;
  rep = TrainingReport{};
  rep.initial_loss = aux_loss(net, examples, config.batch_size);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  nn::OptimizerState opt = config.optimizer;
  for (int epoch = 0; epoch < config.optimizer.max_epochs; ++epoch) {
    opt.epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + config.batch_size)));
      nn::zero_grad(reg.params);
      const Var f = net.fused(Var(batch_of(examples, idx)), Mode::Train);
      Var loss = nn::bce_with_logits(net.aux_logits(f), label_tensor(examples, idx));
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
      loss.backward();
      nn::sgd_step(reg.params, opt);
    }
    EpochLog log{epoch, opt.effective_lr(), loss_sum / static_cast<double>(examples.size())};
    rep.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  const FeatureMatrix feats = fused_features(net, examples);
  std::vector<int> y(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) y[i] = examples[i].label != 0 ? 1 : -1;
  SmoOptions so;
  so.C = config.svm_C;
  so.gamma = config.svm_gamma;
  so.tolerance = config.svm_tolerance;
  SmoResult smo = smo_train(feats, y, so);
  model.svm = std::move(smo.model);
  rep.support_vectors = model.svm.support_vectors.size();
  rep.smo_iterations = smo.iterations;
  return model;
}

DetectorModel train_detector(const std::vector<LabeledRecording>& corpus,
                             const DetectorConfig& config, TrainingReport* report,
                             const EpochCallback& on_epoch) {
  if (corpus.empty()) throw InputError("train_detector: empty corpus");
  std::vector<std::vector<dsp::FrameFeatures>> features;
  features.reserve(corpus.size());
  for (const auto& rec : corpus) features.push_back(dsp::extract_features(rec.audio));
  const Standardizer standardizer = Standardizer::fit(features);
  const auto examples = frame_examples(corpus, features, standardizer, config.context);
  return train_detector_on_frames(examples, standardizer, config, report, on_epoch);
}

DetectionResult detect(const DetectorModel& model, const dsp::AudioBuffer& input,
                       const DetectOptions& options) {
  using Clock = std::chrono::steady_clock;
  input.validate();
  const dsp::AudioBuffer audio =
      input.sample_rate_hz == dsp::kTargetRateHz ? input : dsp::resample(input, dsp::kTargetRateHz);
  const dsp::FrameSpec det = dsp::detection_frame_spec(audio.sample_rate_hz);
  DetectionResult result;
  const std::size_t frames = dsp::frame_count(audio.size(), det);
  if (frames == 0) return result;

  const auto features = dsp::extract_features(audio);
  result.voiced = dsp::voiced_frames(audio, det, options.silence_ratio);
  result.scores.resize(frames);
  result.labels.resize(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const auto t0 = Clock::now();
    const std::size_t center = std::min(center_subframe(k), features.size() - 1);
    const Tensor map = build_frame_map(features, center, model.context, model.standardizer);
    const auto fused = multi_scale_forward(model.net, map);
    const FrameDecision d = classify_frame(model.svm, fused);
    result.scores[k] = d.score;
    result.labels[k] = result.voiced[k] && d.label == FrameLabel::Cough;
    if (options.timing) {
      result.frame_latency_ms.push_back(
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
  }
  result.events = segment_events(result.labels, result.scores, audio, det, options.gap_tolerance);
  return result;
}

namespace {

constexpr const char* kSvKey = "svm.support_vectors";
constexpr const char* kAlphaKey = "svm.alphas";
constexpr const char* kSvmParamsKey = "svm.params";  // bias, gamma, C
constexpr const char* kMeanKey = "standardizer.mean";
constexpr const char* kStdKey = "standardizer.std";
constexpr const char* kContextKey = "detector.context";

}  // namespace

std::string DetectorModel::encode() const {
  // registry() hands out mutable pointers; nothing is written through them here
  auto entries = nn::collect_state(const_cast<DetectorNet&>(net).registry());
  entries.push_back({kMeanKey, Tensor({kFeatureDim}, std::vector<double>(standardizer.mean.begin(),
                                                                        standardizer.mean.end()))});
  entries.push_back({kStdKey, Tensor({kFeatureDim}, std::vector<double>(standardizer.std.begin(),
                                                                       standardizer.std.end()))});
  entries.push_back({kContextKey, Tensor::scalar(static_cast<double>(context))});
  const std::size_t nsv = svm.support_vectors.size();
  if (nsv == 0) throw InputError("detector bundle: SVM has no support vectors");
  std::vector<double> sv;
  sv.reserve(nsv * svm.dim());
  for (const auto& v : svm.support_vectors) sv.insert(sv.end(), v.begin(), v.end());
  entries.push_back({kSvKey, Tensor({nsv, svm.dim()}, std::move(sv))});
  entries.push_back({kAlphaKey, Tensor({nsv}, svm.alphas)});
  entries.push_back({kSvmParamsKey, Tensor({3}, std::vector<double>{svm.bias, svm.gamma, svm.C})});
  return nn::encode_weights(entries);
}

DetectorModel DetectorModel::decode(const std::string& bytes) {
  const auto entries = nn::decode_weights(bytes);
  DetectorModel m{DetectorNet(0), Standardizer::identity(), {}, kDefaultContext};
  auto reg = m.net.registry();
  nn::restore_state(entries, reg);

  const Tensor& mean = nn::find_entry(entries, kMeanKey);
  const Tensor& sd = nn::find_entry(entries, kStdKey);
  if (mean.size() != kFeatureDim || sd.size() != kFeatureDim) {
    throw FormatError("detector bundle: standardizer has the wrong length");
  }
  std::copy(mean.storage().begin(), mean.storage().end(), m.standardizer.mean.begin());
  std::copy(sd.storage().begin(), sd.storage().end(), m.standardizer.std.begin());
  const double ctx = nn::find_entry(entries, kContextKey).item();
  if (!(ctx >= 4) || ctx != std::floor(ctx) || static_cast<std::size_t>(ctx) % 2 != 0) {
    throw FormatError("detector bundle: bad context width");
  }
  m.context = static_cast<std::size_t>(ctx);

  const Tensor& sv = nn::find_entry(entries, kSvKey);
  const Tensor& alphas = nn::find_entry(entries, kAlphaKey);
  const Tensor& params = nn::find_entry(entries, kSvmParamsKey);
  if (sv.rank() != 2 || sv.dim(1) != kFusedDim || alphas.size() != sv.dim(0) || params.size() != 3) {
    throw FormatError("detector bundle: inconsistent SVM section");
  }
  for (std::size_t i = 0; i < sv.dim(0); ++i) {
    m.svm.support_vectors.emplace_back(sv.data() + i * kFusedDim, sv.data() + (i + 1) * kFusedDim);
  }
  m.svm.alphas = alphas.storage();
  m.svm.bias = params[0];
  m.svm.gamma = params[1];
  m.svm.C = params[2];
  return m;
}

void DetectorModel::save(const std::string& path) const { nn::write_binary_file(path, encode()); }

DetectorModel DetectorModel::load(const std::string& path) {
  try {
    return decode(nn::read_binary_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace coughsense::detector

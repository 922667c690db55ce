// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/fewshot/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "coughsense/error.hpp"
#include "coughsense/nn/ops.hpp"
#include "coughsense/nn/serialize.hpp"

namespace coughsense::fewshot {

using nn::Mode;
using nn::Tensor;
using nn::Var;

double attentional_similarity(std::span<const double> xi, std::size_t ti,
                              std::span<const double> ai, std::span<const double> xj,
                              std::size_t tj, std::span<const double> aj, std::size_t d) {
  if (xi.size() != d * ti || xj.size() != d * tj) {
    throw ShapeError("attentional_similarity: embeddings must share the channel count");
  }
  if (ai.size() != ti || aj.size() != tj) {
    throw ShapeError("attentional_similarity: attention length does not match T");
  }
  // sum_t sum_u a_i(t) a_j(u) <x_t, x_u> = <X_i a_i, X_j a_j>
  double total = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    double pi = 0.0, pj = 0.0;
    for (std::size_t t = 0; t < ti; ++t) pi += xi[r * ti + t] * ai[t];
    for (std::size_t u = 0; u < tj; ++u) pj += xj[r * tj + u] * aj[u];
    total += pi * pj;
  }
  return total;
}

double attentional_similarity(const Embedding& a, const Embedding& b) {
  if (a.d != b.d) {
    throw ShapeError("attentional_similarity: channel mismatch " + std::to_string(a.d) + " vs " +
                     std::to_string(b.d));
  }
  return attentional_similarity(a.x, a.t, a.attention, b.x, b.t, b.attention, a.d);
}

namespace {

/// X [D, T] and A [T] -> X A as [D, 1].
Var pool(const Var& x, const Var& a) {
  return nn::matmul(x, nn::reshape(a, {a.value().size(), 1}));
}

}  // namespace

Var attentional_similarity(const Var& xi, const Var& ai, const Var& xj, const Var& aj) {
  if (xi.shape().size() != 2 || xj.shape().size() != 2 || xi.shape()[0] != xj.shape()[0]) {
    throw ShapeError("attentional_similarity: expected [D, T] inputs with equal D");
  }
  if (ai.value().size() != xi.shape()[1] || aj.value().size() != xj.shape()[1]) {
    throw ShapeError("attentional_similarity: attention length does not match T");
  }
  return nn::sum(nn::mul(pool(xi, ai), pool(xj, aj)));
}

Tensor spectrogram_input(const dsp::Spectrogram& spec) {
  if (spec.frames == 0 || spec.d_freq == 0 || spec.data.size() != spec.d_freq * spec.frames) {
    throw InputError("spectrogram is empty or malformed");
  }
  const double n = static_cast<double>(spec.data.size());
  const double mean = std::accumulate(spec.data.begin(), spec.data.end(), 0.0) / n;
  double var = 0.0;
  for (double v : spec.data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  const double inv = sd > 1e-12 ? 1.0 / sd : 1.0;
  Tensor t({1, 1, spec.d_freq, spec.frames});
  for (std::size_t i = 0; i < spec.data.size(); ++i) t[i] = (spec.data[i] - mean) * inv;
  return t;
}

EmbeddingNet::EmbeddingNet(std::uint64_t seed, double norm) : column_norm(norm) {
  nn::Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    blocks[b] = nn::ConvBlock("embed.block" + std::to_string(b + 1), in, kBlockChannels[b],
                              kFreqPool, 1, rng);
    in = kBlockChannels[b];
  }
}

std::vector<Var> EmbeddingNet::finish(const Var& x) const {
  const Var pooled = nn::mean_axis(x, 2);  // [N, 128, T]
  std::vector<Var> out;
  out.reserve(pooled.shape()[0]);
  for (std::size_t n = 0; n < pooled.shape()[0]; ++n) {
    out.push_back(nn::normalize_columns(nn::select(pooled, n), column_norm));
  }
  return out;
}

std::vector<Var> EmbeddingNet::forward(const Var& batch, Mode mode) {
  Var x = batch;
  for (auto& b : blocks) x = b.forward(x, mode);
  return finish(x);
}

std::vector<Var> EmbeddingNet::forward_frozen(const Var& batch) const {
  Var x = batch;
  for (const auto& b : blocks) x = b.forward_frozen(x);
  return finish(x);
}

void EmbeddingNet::register_params(nn::ParamRegistry& reg) {
  for (auto& b : blocks) b.register_params(reg);
}

AttentionNet::AttentionNet(std::uint64_t seed) {
  nn::Rng rng(seed);
  hidden = nn::Conv2d("attend.hidden", kEmbedDim, kAttentionHidden, 1, 3, rng);
  out = nn::Conv2d("attend.out", kAttentionHidden, 1, 1, 3, rng);
}

Var AttentionNet::forward(const Var& embedding) const {
  const std::size_t d = embedding.shape()[0], t = embedding.shape()[1];
  const Var x = nn::reshape(embedding, {1, d, 1, t});
  const Var logits = out.forward(nn::relu(hidden.forward(x)));
  return nn::softmax(nn::reshape(logits, {t}));
}

void AttentionNet::register_params(nn::ParamRegistry& reg) {
  hidden.register_params(reg);
  out.register_params(reg);
}

FewShotModel make_model(std::uint64_t seed, double column_norm) {
  return FewShotModel{EmbeddingNet(seed, column_norm), AttentionNet(seed + 1)};
}

nn::ParamRegistry FewShotModel::registry() {
  nn::ParamRegistry reg;
  embed.register_params(reg);
  attend.register_params(reg);
  return reg;
}

Embedding FewShotModel::embed_spectrogram(const dsp::Spectrogram& spec) const {
  nn::NoGradGuard guard;
  const Var x = embed.forward_frozen(Var(spectrogram_input(spec))).front();
  const Var a = attend.forward(x);
  Embedding e;
  e.d = x.shape()[0];
  e.t = x.shape()[1];
  e.x = x.value().storage();
  e.attention = a.value().storage();
  return e;
}

namespace {

constexpr const char* kNormKey = "embed.column_norm";

}  // namespace

std::string FewShotModel::encode() const {
  // registry() hands out mutable pointers; nothing is written through them here
  auto entries = nn::collect_state(const_cast<FewShotModel*>(this)->registry());
  entries.push_back({kNormKey, Tensor::scalar(embed.column_norm)});
  return nn::encode_weights(entries);
}

FewShotModel FewShotModel::decode(const std::string& bytes) {
  const auto entries = nn::decode_weights(bytes);
  FewShotModel m = make_model(0);
  auto reg = m.registry();
  nn::restore_state(entries, reg);
  const double norm = nn::find_entry(entries, kNormKey).item();
  if (!(norm > 0.0)) throw FormatError("few-shot bundle: column norm must be positive");
  m.embed.column_norm = norm;
  return m;
}

void FewShotModel::save(const std::string& path) const { nn::write_binary_file(path, encode()); }

FewShotModel FewShotModel::load(const std::string& path) {
  try {
    return decode(nn::read_binary_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::vector<std::vector<std::size_t>> Dataset::members() const {
  std::vector<std::vector<std::size_t>> m(class_names.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_names.size()) throw InputError("dataset: label out of range");
    m[labels[i]].push_back(i);
  }
  return m;
}

Dataset Dataset::subset(const std::vector<std::size_t>& classes) const {
  Dataset out;
  std::vector<long> remap(class_names.size(), -1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= class_names.size()) throw InputError("dataset: class id out of range");
    remap[classes[i]] = static_cast<long>(i);
    out.class_names.push_back(class_names[classes[i]]);
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (remap[labels[i]] < 0) continue;
    out.items.push_back(items[i]);
    out.labels.push_back(static_cast<std::size_t>(remap[labels[i]]));
  }
  return out;
}

EpisodeSpec sample_episode(const Dataset& data, std::size_t c, std::size_t k, std::mt19937_64& rng) {
  if (c == 0 || k == 0) throw InputError("sample_episode: c and k must be positive");
  const auto members = data.members();
  if (members.size() < c) {
    throw InputError("sample_episode: " + std::to_string(c) + "-way episodes need " +
                     std::to_string(c) + " classes, dataset has " + std::to_string(members.size()));
  }
  for (std::size_t cls = 0; cls < members.size(); ++cls) {
    if (members[cls].size() < k + 1) {
      throw InputError("sample_episode: class '" + data.class_names[cls] + "' has " +
                       std::to_string(members[cls].size()) + " examples, needs at least " +
                       std::to_string(k + 1));
    }
  }
  EpisodeSpec ep;
  ep.c = c;
  ep.k = k;
  std::vector<std::size_t> all(members.size());
  std::iota(all.begin(), all.end(), 0);
  // partial Fisher-Yates: the first c entries become the episode classes
  for (std::size_t i = 0; i < c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  ep.classes.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(c));
  ep.query_class = std::uniform_int_distribution<std::size_t>(0, c - 1)(rng);
  for (std::size_t e = 0; e < c; ++e) {
    std::vector<std::size_t> pool = members[ep.classes[e]];
    const std::size_t take = e == ep.query_class ? k + 1 : k;
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    ep.support.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    if (e == ep.query_class) ep.query = pool[k];
  }
  return ep;
}

std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) return {};
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::size_t ClassScores::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probability.size(); ++i) {
    if (probability[i] > probability[best]) best = i;
  }
  return best;
}

ClassScores class_scores(const Embedding& query,
                         const std::vector<std::vector<Embedding>>& support) {
  if (support.empty()) throw InputError("class_scores: no classes");
  ClassScores s;
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (support[c].empty()) {
      throw InputError("class_scores: class " + std::to_string(c) + " has no support examples");
    }
    double total = 0.0;
    for (const auto& ex : support[c]) total += attentional_similarity(query, ex);
    s.similarity.push_back(total / static_cast<double>(support[c].size()));
  }
  s.probability = softmax(s.similarity);
  return s;
}

namespace {

struct Embedded {
  Var x;  // [128, T]
  Var pooled;  // X A as [128, 1]
};

/// Embeds every distinct item of a step, batching items of equal length so
/// batch normalization sees real batches.
std::map<std::size_t, Embedded> embed_items(FewShotModel& model, const Dataset& data,
                                            const std::vector<std::size_t>& ids) {
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t id : ids) by_len[data.items[id].frames].push_back(id);
  std::map<std::size_t, Embedded> out;
  for (const auto& [len, group] : by_len) {
    const std::size_t f = data.items[group.front()].d_freq;
    Tensor batch({group.size(), 1, f, len});
    for (std::size_t g = 0; g < group.size(); ++g) {
      const Tensor one = spectrogram_input(data.items[group[g]]);
      if (one.dim(2) != f) throw InputError("train_fewshot: spectrograms differ in frequency bins");
      std::copy(one.storage().begin(), one.storage().end(), batch.data() + g * one.size());
    }
    const auto xs = model.embed.forward(Var(std::move(batch)), Mode::Train);
    for (std::size_t g = 0; g < group.size(); ++g) {
      const Var a = model.attend.forward(xs[g]);
      out[group[g]] = Embedded{xs[g], pool(xs[g], a)};
    }
  }
  return out;
}

}  // namespace

FewShotModel train_fewshot(const Dataset& data, const FewShotConfig& config,
                           std::vector<StepLog>* log, const StepCallback& on_step) {
  if (config.episodes_per_step == 0 || config.steps_per_epoch == 0) {
    throw InputError("train_fewshot: episodes per step and steps per epoch must be positive");
  }
  FewShotModel model = make_model(config.seed, config.column_norm);
  nn::ParamRegistry reg = model.registry();
  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  nn::OptimizerState opt = config.optimizer;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.optimizer.max_epochs; ++epoch) {
    opt.epoch = epoch;
    for (std::size_t s = 0; s < config.steps_per_epoch; ++s, ++step) {
      std::vector<EpisodeSpec> episodes;
      std::vector<std::size_t> ids;
      for (std::size_t e = 0; e < config.episodes_per_step; ++e) {
        episodes.push_back(sample_episode(data, config.c, config.k, rng));
        for (const auto& cls : episodes.back().support) ids.insert(ids.end(), cls.begin(), cls.end());
        ids.push_back(episodes.back().query);
      }
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

      nn::zero_grad(reg.params);
      const auto emb = embed_items(model, data, ids);
      Var total;
      for (const auto& ep : episodes) {
        const Var& q = emb.at(ep.query).pooled;
        std::vector<Var> scores;
        for (const auto& cls : ep.support) {
          Var acc;
          for (std::size_t id : cls) {
            const Var sim = nn::sum(nn::mul(q, emb.at(id).pooled));
            acc = acc.defined() ? nn::add(acc, sim) : sim;
          }
          scores.push_back(nn::scale(acc, 1.0 / static_cast<double>(cls.size())));
        }
        const Var logits = nn::reshape(nn::stack(scores), {scores.size()});
        const Var ce = nn::cross_entropy(logits, ep.query_class);
        total = total.defined() ? nn::add(total, ce) : ce;
      }
      Var loss = nn::scale(total, 1.0 / static_cast<double>(episodes.size()));
      const double loss_value = loss.value().item();
      loss.backward();
      nn::sgd_step(reg.params, opt);

      const StepLog entry{epoch, step, opt.effective_lr(), loss_value};
      if (log) log->push_back(entry);
      if (on_step) on_step(entry);
    }
  }
  return model;
}

SupportBank SupportBank::build(const FewShotModel& model, const Dataset& data) {
  SupportBank bank;
  bank.class_names = data.class_names;
  bank.exemplars.resize(data.class_names.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    bank.exemplars.at(data.labels[i]).push_back(model.embed_spectrogram(data.items[i]));
  }
  for (std::size_t c = 0; c < bank.exemplars.size(); ++c) {
    if (bank.exemplars[c].empty()) {
      throw InputError("support bank: class '" + bank.class_names[c] + "' has no exemplars");
    }
  }
  if (bank.exemplars.empty()) throw InputError("support bank: no classes");
  return bank;
}

Classification classify_embedding(const Embedding& query, const SupportBank& bank) {
  Classification c;
  c.scores = class_scores(query, bank.exemplars);
  c.predicted = c.scores.argmax();
  c.class_name = bank.class_names.at(c.predicted);
  return c;
}

Classification classify_event(const dsp::Spectrogram& event, const SupportBank& bank,
                              const FewShotModel& model) {
  return classify_embedding(model.embed_spectrogram(event), bank);
}

}  // namespace coughsense::fewshot

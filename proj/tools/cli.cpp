// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "coughsense/audio.hpp"
#include "coughsense/detector/detector.hpp"
#include "coughsense/error.hpp"
#include "coughsense/eval/harness.hpp"
#include "coughsense/features.hpp"
#include "coughsense/fewshot/fewshot.hpp"
#include "coughsense/risk/records.hpp"
#include "coughsense/synth.hpp"
#include "json.hpp"

namespace coughsense::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::string model_dir() {
  const char* env = std::getenv("COUGHSENSE_MODEL_DIR");
  return env && *env ? env : "models";
}

std::string in_model_dir(const char* file) { return (fs::path(model_dir()) / file).string(); }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw InputError(parent.string() + ": cannot create directory: " + ec.message());
}

dsp::AudioBuffer read_audio(const std::string& path, std::istream& in) {
  if (path == "-") return dsp::resample(dsp::read_wav(in, "<stdin>"), dsp::kTargetRateHz);
  return dsp::load_audio(path);
}

struct Globals {
  std::uint64_t seed = 0;
  bool timing = false;
};

struct FeaturesOpts {
  std::string wav;
  std::string out = "-";
};

struct DetectOpts {
  std::string wav;
  std::string model;
  std::string out;
  std::size_t gap = 1;
  double silence_ratio = 0.5;
};

struct DetectorTrainOpts {
  int epochs = 60;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double weight_decay = 1e-4;
  std::size_t context = detector::kDefaultContext;
  double svm_c = 1.0;
  double svm_gamma = 0.0;
};

struct FewShotTrainOpts {
  int epochs = 60;
  std::size_t way = 3;
  std::size_t shot = 5;
  std::size_t steps_per_epoch = 10;
  std::size_t episodes_per_step = 4;
  double lr = 0.01;
  double weight_decay = 1e-4;
  double column_norm = fewshot::kDefaultColumnNorm;
};

struct TrainOpts {
  std::string manifest;
  std::string out;
};

struct ClassifyOpts {
  std::string input;
  std::string model;
  std::string bank;
};

struct SessionOpts {
  std::string wav;
  std::optional<double> temperature;
  std::string detector_model;
  std::string fewshot_model;
  std::string bank;
  std::string out_dir = "records";
  std::string timestamp;
  std::optional<int> age;
  std::optional<std::string> sex;
  std::string location;
  risk::RiskConfig risk;
  std::size_t gap = 1;
  double silence_ratio = 0.5;
};

struct EvalOpts {
  std::string task = "detector";
  std::string manifest;
  std::string out;
  std::size_t folds = 10;
  bool no_stratify = false;
};

struct QueryOpts {
  std::string dir = "records";
  std::optional<double> min_risk;
  std::optional<double> min_temperature;
  std::optional<std::string> session;
};

struct SynthCorpusOpts {
  std::string out_dir;
  std::size_t recordings = 50;
  std::size_t frames = 20;
  std::size_t max_bursts = 5;
};

struct SynthClassesOpts {
  std::string out_dir;
  std::size_t per_class = 30;
  std::vector<double> durations = {0.4, 0.55, 0.7};
};

struct SynthRecordingOpts {
  std::string out;
  std::size_t frames = 20;
  std::size_t bursts = 2;
  bool silent = false;
};

detector::DetectorConfig detector_config(const DetectorTrainOpts& o, std::uint64_t seed) {
  detector::DetectorConfig c;
  c.context = o.context;
  c.batch_size = o.batch_size;
  c.optimizer.base_lr = o.lr;
  c.optimizer.weight_decay = o.weight_decay;
  c.optimizer.max_epochs = o.epochs;
  c.svm_C = o.svm_c;
  c.svm_gamma = o.svm_gamma;
  c.seed = seed;
  return c;
}

fewshot::FewShotConfig fewshot_config(const FewShotTrainOpts& o, std::uint64_t seed) {
  fewshot::FewShotConfig c;
  c.c = o.way;
  c.k = o.shot;
  c.steps_per_epoch = o.steps_per_epoch;
  c.episodes_per_step = o.episodes_per_step;
  c.optimizer.base_lr = o.lr;
  c.optimizer.weight_decay = o.weight_decay;
  c.optimizer.max_epochs = o.epochs;
  c.column_norm = o.column_norm;
  c.seed = seed;
  return c;
}

void report_timing(const std::vector<double>& latency_ms, std::ostream& out) {
  if (latency_ms.empty()) {
    out << "timing: no frames\n";
    return;
  }
  double sum = 0.0, worst = 0.0;
  for (double v : latency_ms) {
    sum += v;
    worst = std::max(worst, v);
  }
  out << format("timing: %zu frames, mean %.3f ms, max %.3f ms per frame\n", latency_ms.size(),
                sum / static_cast<double>(latency_ms.size()), worst);
}

// ---- commands --------------------------------------------------------------

int cmd_features(const FeaturesOpts& o, std::ostream& out, std::istream& in) {
  const auto audio = read_audio(o.wav, in);
  const auto features = dsp::extract_features(audio);
  if (o.out == "-") {
    dsp::write_feature_dump(out, features);
    return kExitOk;
  }
  ensure_parent(o.out);
  std::ofstream file(o.out, std::ios::binary);
  if (!file) throw InputError(o.out + ": cannot open for writing");
  dsp::write_feature_dump(file, features);
  out << format("features: %zu frames -> %s\n", features.size(), o.out.c_str());
  return kExitOk;
}

int cmd_detect(const DetectOpts& o, const Globals& g, std::ostream& out, std::istream& in) {
  const auto model = detector::DetectorModel::load(o.model);
  const auto audio = read_audio(o.wav, in);
  detector::DetectOptions opts;
  opts.gap_tolerance = o.gap;
  opts.silence_ratio = o.silence_ratio;
  opts.timing = g.timing;
  const auto result = detector::detect(model, audio, opts);

  Json events = Json::array();
  for (std::size_t i = 0; i < result.events.size(); ++i) {
    const auto& e = result.events[i];
    out << format("event %zu: start=%.3f s end=%.3f s duration=%.3f s peak=%.4f\n", i + 1, e.start_s,
                  e.end_s, e.duration_s(), e.peak_score);
    Json j;
    j["start_s"] = e.start_s;
    j["end_s"] = e.end_s;
    j["first_frame"] = e.first_frame;
    j["last_frame"] = e.last_frame;
    j["peak_score"] = e.peak_score;
    events.push_back(j);
  }
  out << format("%zu events in %zu frames\n", result.events.size(), result.scores.size());
  if (g.timing) report_timing(result.frame_latency_ms, out);
  if (!o.out.empty()) {
    Json doc;
    doc["audio"] = o.wav;
    doc["frames"] = result.scores.size();
    doc["events"] = events;
    ensure_parent(o.out);
    std::ofstream file(o.out);
    if (!file) throw InputError(o.out + ": cannot open for writing");
    file << doc.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_train_detector(const TrainOpts& t, const DetectorTrainOpts& o, const Globals& g,
                       std::ostream& out) {
  const auto corpus = load_detector_manifest(t.manifest);
  detector::TrainingReport report;
  const auto model = detector::train_detector(
      corpus, detector_config(o, g.seed), &report, [&](const detector::EpochLog& log) {
        out << format("epoch %d lr=%g loss=%.6f\n", log.epoch, log.learning_rate, log.mean_loss);
        out.flush();
      });
  ensure_parent(t.out);
  model.save(t.out);
  out << format("initial loss %.6f, %zu support vectors, %zu SMO iterations\n", report.initial_loss,
                report.support_vectors, report.smo_iterations);
  out << "saved " << t.out << '\n';
  return kExitOk;
}

int cmd_train_fewshot(const TrainOpts& t, const FewShotTrainOpts& o, const Globals& g,
                      std::ostream& out) {
  const auto data = load_class_manifest(t.manifest);
  double sum = 0.0;
  std::size_t n = 0;
  const auto model = fewshot::train_fewshot(data, fewshot_config(o, g.seed), nullptr,
                                            [&](const fewshot::StepLog& log) {
                                              sum += log.loss;
                                              if (++n < o.steps_per_epoch) return;
                                              out << format("epoch %d lr=%g loss=%.6f\n", log.epoch,
                                                            log.learning_rate, sum / n);
                                              out.flush();
                                              sum = 0.0;
                                              n = 0;
                                            });
  ensure_parent(t.out);
  model.save(t.out);
  out << "saved " << t.out << '\n';
  return kExitOk;
}

fewshot::SupportBank load_bank(const std::string& manifest, const fewshot::FewShotModel& model) {
  return fewshot::SupportBank::build(model, load_class_manifest(manifest));
}

int cmd_classify(const ClassifyOpts& o, std::ostream& out, std::istream& in) {
  const auto model = fewshot::FewShotModel::load(o.model);
  const auto bank = load_bank(o.bank, model);
  const auto spec = o.input == "-" ? dsp::spectrogram(read_audio("-", in)) : load_spectrogram(o.input);
  const auto c = fewshot::classify_event(spec, bank, model);
  out << "class,similarity,probability\n";
  for (std::size_t i = 0; i < bank.class_names.size(); ++i) {
    out << format("%s,%.6f,%.6f\n", bank.class_names[i].c_str(), c.scores.similarity[i],
                  c.scores.probability[i]);
  }
  out << "predicted: " << c.class_name << '\n';
  return kExitOk;
}

int cmd_session(const SessionOpts& o, const Globals& g, std::ostream& out, std::istream& in) {
  o.risk.validate();
  const auto det = detector::DetectorModel::load(o.detector_model);
  const auto fsm = fewshot::FewShotModel::load(o.fewshot_model);
  const auto bank = load_bank(o.bank, fsm);
  if (std::find(bank.class_names.begin(), bank.class_names.end(), o.risk.covid_class) ==
      bank.class_names.end()) {
    throw InputError("risk class '" + o.risk.covid_class + "' is not a class of the support bank");
  }
  const auto audio = read_audio(o.wav, in);

  detector::DetectOptions opts;
  opts.gap_tolerance = o.gap;
  opts.silence_ratio = o.silence_ratio;
  opts.timing = g.timing;
  const auto detection = detector::detect(det, audio, opts);

  risk::EncounterRecord record;
  record.timestamp = o.timestamp.empty() ? risk::utc_timestamp_now() : o.timestamp;
  record.session_id = risk::make_session_id(record.timestamp, audio_fingerprint(audio));
  record.temperature_c = o.temperature;
  record.demographics.age = o.age;
  record.demographics.sex = o.sex;
  record.location_note = o.location;
  record.audio_refs = {o.wav == "-" ? std::string("<stdin>") : o.wav};
  for (const auto& e : detection.events) {
    const auto c = fewshot::classify_event(e.segment_spectrogram, bank, fsm);
    risk::EventRecord r;
    r.start_s = e.start_s;
    r.end_s = e.end_s;
    r.peak_score = e.peak_score;
    r.predicted_class = c.class_name;
    for (std::size_t i = 0; i < bank.class_names.size(); ++i) {
      r.scores.push_back({bank.class_names[i], c.scores.similarity[i], c.scores.probability[i]});
    }
    record.events.push_back(std::move(r));
  }
  record = risk::apply_rules(std::move(record), o.risk);

  risk::RecordStore store(o.out_dir);
  const std::string path = store.append(record);

  out << "session " << record.session_id << '\n';
  if (!record.temperature_c) out << "temperature: not supplied, record incomplete\n";
  for (std::size_t i = 0; i < record.events.size(); ++i) {
    const auto& e = record.events[i];
    out << format("event %zu: start=%.3f s end=%.3f s class=%s p(%s)=%.4f\n", i + 1, e.start_s,
                  e.end_s, e.predicted_class.c_str(), o.risk.covid_class.c_str(),
                  e.probability_of(o.risk.covid_class));
  }
  out << format("risk score: %.4f\n", record.risk_score);
  for (const auto& a : record.alerts) out << "ALERT " << risk::to_string(a.kind) << ": " << a.detail << '\n';
  for (const auto& p : record.prompts_issued) out << "PROMPT: " << p << '\n';
  if (g.timing) report_timing(detection.frame_latency_ms, out);
  out << "record: " << path << '\n';
  return kExitOk;
}

/// Per-class rows from per-fold predictions, each averaged over folds.
std::vector<std::pair<std::string, eval::MetricReport>> per_class_rows(
    const std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>& folds,
    const std::vector<std::string>& class_names) {
  std::vector<std::pair<std::string, eval::MetricReport>> rows;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<eval::MetricReport> reports;
    for (const auto& [pred, truth] : folds) reports.push_back(eval::confusion_metrics(pred, truth, c));
    rows.emplace_back(class_names[c], eval::average(reports));
  }
  return rows;
}

std::string eval_detector(const EvalOpts& e, const DetectorTrainOpts& o, const Globals& g) {
  const auto corpus = load_detector_manifest(e.manifest);
  std::vector<std::vector<dsp::FrameFeatures>> features;
  for (const auto& r : corpus) features.push_back(dsp::extract_features(r.audio));
  const auto standardizer = detector::Standardizer::fit(features);
  const auto examples = detector::frame_examples(corpus, features, standardizer, o.context);
  std::vector<std::size_t> labels;
  for (const auto& ex : examples) labels.push_back(static_cast<std::size_t>(ex.label));

  eval::CvOptions cv;
  cv.n_folds = e.folds;
  cv.seed = g.seed;
  cv.stratified = !e.no_stratify;
  cv.positive_class = 1;
  cv.required_classes = {0, 1};
  cv.class_names = {"other", "cough"};
  const auto config = detector_config(o, g.seed);
  const auto report = eval::run_cv(labels, [&](const auto& train, const auto& test) {
    std::vector<detector::FrameExample> tr, te;
    for (std::size_t id : train) tr.push_back(examples[id]);
    for (std::size_t id : test) te.push_back(examples[id]);
    const auto model = detector::train_detector_on_frames(tr, standardizer, config);
    std::vector<std::size_t> pred;
    for (const auto& f : detector::fused_features(model.net, te)) {
      pred.push_back(detector::classify_frame(model.svm, f).label == detector::FrameLabel::Cough);
    }
    return pred;
  }, cv);
  return eval::format_table({{"CNN+SVM", report.mean}});
}

std::string eval_fewshot(const EvalOpts& e, const FewShotTrainOpts& o, const Globals& g) {
  const auto data = load_class_manifest(e.manifest);
  eval::CvOptions cv;
  cv.n_folds = e.folds;
  cv.seed = g.seed;
  cv.stratified = !e.no_stratify;
  cv.class_names = data.class_names;
  const auto config = fewshot_config(o, g.seed);
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
  const auto report = eval::run_cv(data.labels, [&](const auto& train, const auto& test) {
    fewshot::Dataset tr;
    tr.class_names = data.class_names;
    for (std::size_t id : train) {
      tr.items.push_back(data.items[id]);
      tr.labels.push_back(data.labels[id]);
    }
    const auto model = fewshot::train_fewshot(tr, config);
    // the first `shot` training items of each class form the support bank
    fewshot::Dataset support;
    support.class_names = data.class_names;
    std::vector<std::size_t> taken(data.class_names.size(), 0);
    for (std::size_t i = 0; i < tr.items.size(); ++i) {
      if (taken[tr.labels[i]]++ >= o.shot) continue;
      support.items.push_back(tr.items[i]);
      support.labels.push_back(tr.labels[i]);
    }
    const auto bank = fewshot::SupportBank::build(model, support);
    std::vector<std::size_t> pred, truth;
    for (std::size_t id : test) {
      pred.push_back(fewshot::classify_event(data.items[id], bank, model).predicted);
      truth.push_back(data.labels[id]);
    }
    folds.emplace_back(pred, truth);
    return pred;
  }, cv);
  (void)report;
  return eval::format_table(per_class_rows(folds, data.class_names));
}

int cmd_eval(const EvalOpts& e, const DetectorTrainOpts& d, FewShotTrainOpts f, const Globals& g,
             std::ostream& out) {
  f.epochs = d.epochs;
  f.lr = d.lr;
  const std::string table = e.task == "detector" ? eval_detector(e, d, g) : eval_fewshot(e, f, g);
  out << table;
  if (!e.out.empty()) {
    ensure_parent(e.out);
    std::ofstream file(e.out);
    if (!file) throw InputError(e.out + ": cannot open for writing");
    file << table;
  }
  return kExitOk;
}

int cmd_records_query(const QueryOpts& q, std::ostream& out) {
  if (!fs::is_directory(q.dir)) throw InputError(q.dir + ": no such record directory");
  const risk::RecordStore store(q.dir);
  risk::RecordQuery query;
  query.min_risk = q.min_risk;
  query.min_temperature_c = q.min_temperature;
  query.session_id = q.session;
  out << "session_id\tpath\ttemperature_c\trisk_score\n";
  for (const auto& e : risk::query(store.index(), query)) {
    out << e.session_id << '\t' << e.path << '\t'
        << (e.temperature_c ? format("%.2f", *e.temperature_c) : std::string("NA")) << '\t'
        << format("%.6f", e.risk_score) << '\n';
  }
  return kExitOk;
}

int cmd_synth_corpus(const SynthCorpusOpts& o, const Globals& g, std::ostream& out) {
  synth::DetectorCorpusOptions opts;
  opts.recordings = o.recordings;
  opts.frames_per_recording = o.frames;
  opts.max_bursts = o.max_bursts;
  const auto corpus = synth::detector_corpus(opts, g.seed);
  fs::create_directories(o.out_dir);
  std::ofstream manifest(fs::path(o.out_dir) / "manifest.csv");
  std::ofstream bursts(fs::path(o.out_dir) / "bursts.csv");
  if (!manifest || !bursts) throw InputError(o.out_dir + ": cannot write corpus files");
  manifest << "# wav,labels\n";
  bursts << "# recording,start_s,end_s\n";
  for (const auto& r : corpus) {
    const std::string wav = r.recording.name + ".wav";
    const std::string lab = r.recording.name + ".labels";
    dsp::write_wav((fs::path(o.out_dir) / wav).string(), r.recording.audio);
    write_label_track((fs::path(o.out_dir) / lab).string(), r.recording.frame_labels);
    manifest << wav << ',' << lab << '\n';
    for (const auto& b : r.bursts) bursts << format("%s,%.4f,%.4f\n", wav.c_str(), b.start_s, b.end_s);
  }
  out << format("wrote %zu recordings to %s\n", corpus.size(), o.out_dir.c_str());
  return kExitOk;
}

int cmd_synth_classes(const SynthClassesOpts& o, const Globals& g, std::ostream& out) {
  if (o.durations.empty()) throw InputError("--durations needs at least one value");
  synth::Rng rng(g.seed);
  fs::create_directories(o.out_dir);
  std::ofstream manifest(fs::path(o.out_dir) / "manifest.csv");
  if (!manifest) throw InputError(o.out_dir + ": cannot write manifest");
  manifest << "# class,wav\n";
  const auto& names = synth::sound_class_names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    for (std::size_t i = 0; i < o.per_class; ++i) {
      const auto clip = synth::sound_clip(c, o.durations[i % o.durations.size()], rng);
      const std::string wav = format("%s_%03zu.wav", names[c].c_str(), i);
      dsp::write_wav((fs::path(o.out_dir) / wav).string(), clip);
      manifest << names[c] << ',' << wav << '\n';
    }
  }
  out << format("wrote %zu clips to %s\n", names.size() * o.per_class, o.out_dir.c_str());
  return kExitOk;
}

int cmd_synth_recording(const SynthRecordingOpts& o, const Globals& g, std::ostream& out) {
  ensure_parent(o.out);
  if (o.silent) {
    const auto spec = dsp::detection_frame_spec();
    dsp::AudioBuffer silence;
    silence.samples.assign(spec.frame_len_samples + (o.frames - 1) * spec.hop_samples, 0.0);
    dsp::write_wav(o.out, silence);
    out << "wrote " << o.out << " (silence)\n";
    return kExitOk;
  }
  synth::Rng rng(g.seed);
  const auto r = synth::detector_recording(o.frames, o.bursts, synth::DetectorCorpusOptions{}, rng);
  dsp::write_wav(o.out, r.recording.audio);
  for (const auto& b : r.bursts) out << format("burst: start=%.3f s end=%.3f s\n", b.start_s, b.end_s);
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

void add_detector_train_options(CLI::App* app, DetectorTrainOpts& o) {
  app->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  app->add_option("--batch-size", o.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  app->add_option("--lr", o.lr, "Base learning rate (x0.1 every 20 epochs)")->check(CLI::PositiveNumber);
  app->add_option("--weight-decay", o.weight_decay, "L2 weight decay")->check(CLI::NonNegativeNumber);
  app->add_option("--context", o.context, "Sub-frames per feature map (even, >= 4)");
  app->add_option("--svm-c", o.svm_c, "SVM box constraint")->check(CLI::PositiveNumber);
  app->add_option("--svm-gamma", o.svm_gamma, "RBF gamma; 0 picks 1/(d Var)");
}

void add_fewshot_train_options(CLI::App* app, FewShotTrainOpts& o) {
  app->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  app->add_option("--way", o.way, "Classes per episode")->check(CLI::PositiveNumber);
  app->add_option("--shot", o.shot, "Support examples per class")->check(CLI::PositiveNumber);
  app->add_option("--steps-per-epoch", o.steps_per_epoch, "SGD steps per epoch")
      ->check(CLI::PositiveNumber);
  app->add_option("--episodes-per-step", o.episodes_per_step, "Episodes averaged per step")
      ->check(CLI::PositiveNumber);
  app->add_option("--lr", o.lr, "Base learning rate (x0.1 every 20 epochs)")->check(CLI::PositiveNumber);
  app->add_option("--weight-decay", o.weight_decay, "L2 weight decay")->check(CLI::NonNegativeNumber);
  app->add_option("--column-norm", o.column_norm, "L2 norm of every embedding column")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in) {
  CLI::App app{"Cough detection, few-shot cough classification and encounter records", "coughsense"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; nested objects configure subcommands");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_flag("--timing", g.timing, "Report per-frame processing latency");

  const std::string det_default = in_model_dir("detector.csnw");
  const std::string fs_default = in_model_dir("fewshot.csnw");
  const std::string bank_default = in_model_dir("bank.csv");

  FeaturesOpts feat;
  auto* features = app.add_subcommand("features", "Dump per-sub-frame features of a WAV file");
  features->add_option("wav", feat.wav, "Input WAV ('-' reads stdin)")->required();
  features->add_option("-o,--out", feat.out, "Output dump ('-' writes stdout)");

  DetectOpts det;
  det.model = det_default;
  auto* detect = app.add_subcommand("detect", "Detect cough events in a recording");
  detect->add_option("wav", det.wav, "Input WAV ('-' reads stdin)")->required();
  detect->add_option("--model", det.model, "Detector bundle");
  detect->add_option("-o,--out", det.out, "Write the event list as JSON");
  detect->add_option("--gap-tolerance", det.gap, "Negative frames bridged inside one event");
  detect->add_option("--silence-ratio", det.silence_ratio, "Silence threshold relative to the mean frame std");

  TrainOpts train_det{"", det_default};
  DetectorTrainOpts det_opts;
  auto* train_detector = app.add_subcommand("train-detector", "Train the CNN + SVM cough detector");
  train_detector->add_option("--manifest", train_det.manifest, "CSV rows: wav,labels")->required();
  train_detector->add_option("-o,--out", train_det.out, "Output bundle");
  add_detector_train_options(train_detector, det_opts);

  TrainOpts train_fs{"", fs_default};
  FewShotTrainOpts fs_opts;
  auto* train_fewshot = app.add_subcommand("train-fewshot", "Episodic training of the few-shot classifier");
  train_fewshot->add_option("--manifest", train_fs.manifest, "CSV rows: class,wav-or-spectrogram")
      ->required();
  train_fewshot->add_option("-o,--out", train_fs.out, "Output bundle");
  add_fewshot_train_options(train_fewshot, fs_opts);

  ClassifyOpts cls{"", fs_default, bank_default};
  auto* classify = app.add_subcommand("classify", "Classify one clip against a support bank");
  classify->add_option("input", cls.input, "WAV, spectrogram dump, or '-' for a WAV on stdin")
      ->required();
  classify->add_option("--model", cls.model, "Few-shot bundle");
  classify->add_option("--bank", cls.bank, "Support bank manifest (class,path rows)");

  SessionOpts ses;
  ses.detector_model = det_default;
  ses.fewshot_model = fs_default;
  ses.bank = bank_default;
  auto* session = app.add_subcommand("session", "Run one encounter: detect, classify, score, record");
  session->add_option("wav", ses.wav, "Encounter recording ('-' reads stdin)")->required();
  session->add_option("--temperature", ses.temperature, "Body temperature in C (omit if unknown)");
  session->add_option("--detector", ses.detector_model, "Detector bundle");
  session->add_option("--model", ses.fewshot_model, "Few-shot bundle");
  session->add_option("--bank", ses.bank, "Support bank manifest (class,path rows)");
  session->add_option("--out-dir", ses.out_dir, "Record store directory");
  session->add_option("--timestamp", ses.timestamp, "ISO 8601 time of the encounter (default: now)");
  session->add_option("--age", ses.age, "Patient age");
  session->add_option("--sex", ses.sex, "Patient sex");
  session->add_option("--location", ses.location, "Free-text location note");
  session->add_option("--covid-class", ses.risk.covid_class, "Support-bank class scored for risk");
  session->add_option("--fever-threshold", ses.risk.fever_threshold_c, "Fever alert threshold in C");
  session->add_option("--risk-threshold", ses.risk.covid_risk_threshold, "Risk alert threshold in [0,1]");
  session->add_option("--gap-tolerance", ses.gap, "Negative frames bridged inside one event");
  session->add_option("--silence-ratio", ses.silence_ratio, "Silence threshold relative to the mean frame std");

  EvalOpts ev;
  DetectorTrainOpts ev_det;
  FewShotTrainOpts ev_fs;
  auto* evaluate = app.add_subcommand("eval", "Cross-validated metric table");
  evaluate->add_option("--task", ev.task, "detector or fewshot")
      ->check(CLI::IsMember({"detector", "fewshot"}));
  evaluate->add_option("--manifest", ev.manifest, "Detector or class manifest")->required();
  evaluate->add_option("--folds", ev.folds, "Number of folds")->check(CLI::PositiveNumber);
  evaluate->add_flag("--no-stratify", ev.no_stratify, "Plain random folds");
  evaluate->add_option("-o,--out", ev.out, "Also write the table here");
  evaluate->add_option("--epochs", ev_det.epochs, "Training epochs per fold")->check(CLI::PositiveNumber);
  evaluate->add_option("--batch-size", ev_det.batch_size, "Detector mini-batch size");
  evaluate->add_option("--context", ev_det.context, "Detector sub-frames per map");
  evaluate->add_option("--svm-c", ev_det.svm_c, "SVM box constraint");
  evaluate->add_option("--svm-gamma", ev_det.svm_gamma, "RBF gamma; 0 picks 1/(d Var)");
  evaluate->add_option("--lr", ev_det.lr, "Base learning rate");
  evaluate->add_option("--way", ev_fs.way, "Few-shot classes per episode");
  evaluate->add_option("--shot", ev_fs.shot, "Few-shot support examples per class");
  evaluate->add_option("--steps-per-epoch", ev_fs.steps_per_epoch, "Few-shot steps per epoch");
  evaluate->add_option("--episodes-per-step", ev_fs.episodes_per_step, "Few-shot episodes per step");

  QueryOpts qo;
  auto* records = app.add_subcommand("records", "Encounter record store");
  records->require_subcommand(1);
  auto* query = records->add_subcommand("query", "List indexed records matching filters");
  query->add_option("--dir", qo.dir, "Record store directory");
  query->add_option("--min-risk", qo.min_risk, "Only risk scores at or above");
  query->add_option("--min-temperature", qo.min_temperature, "Only temperatures at or above");
  query->add_option("--session", qo.session, "Only this session id");

  SynthCorpusOpts sc;
  SynthClassesOpts scl;
  SynthRecordingOpts sr;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic data sets");
  synth_cmd->require_subcommand(1);
  auto* synth_corpus = synth_cmd->add_subcommand("detector-corpus", "Labeled tone-burst recordings");
  synth_corpus->add_option("--out-dir", sc.out_dir, "Output directory")->required();
  synth_corpus->add_option("--recordings", sc.recordings, "Number of recordings")->check(CLI::PositiveNumber);
  synth_corpus->add_option("--frames", sc.frames, "Detection frames per recording")->check(CLI::PositiveNumber);
  synth_corpus->add_option("--max-bursts", sc.max_bursts, "Most bursts per recording");
  auto* synth_classes = synth_cmd->add_subcommand("sound-classes", "Clips of the five sound classes");
  synth_classes->add_option("--out-dir", scl.out_dir, "Output directory")->required();
  synth_classes->add_option("--per-class", scl.per_class, "Clips per class")->check(CLI::PositiveNumber);
  synth_classes->add_option("--durations", scl.durations, "Clip durations in s, cycled");
  auto* synth_rec = synth_cmd->add_subcommand("recording", "One recording with planted bursts");
  synth_rec->add_option("-o,--out", sr.out, "Output WAV")->required();
  synth_rec->add_option("--frames", sr.frames, "Detection frames")->check(CLI::PositiveNumber);
  synth_rec->add_option("--bursts", sr.bursts, "Planted bursts");
  synth_rec->add_flag("--silent", sr.silent, "All-zero recording");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  err << "config: " << app.config_to_str(true, false) << '\n';

  try {
    if (features->parsed()) return cmd_features(feat, out, in);
    if (detect->parsed()) return cmd_detect(det, g, out, in);
    if (train_detector->parsed()) return cmd_train_detector(train_det, det_opts, g, out);
    if (train_fewshot->parsed()) return cmd_train_fewshot(train_fs, fs_opts, g, out);
    if (classify->parsed()) return cmd_classify(cls, out, in);
    if (session->parsed()) return cmd_session(ses, g, out, in);
    if (evaluate->parsed()) return cmd_eval(ev, ev_det, ev_fs, g, out);
    if (query->parsed()) return cmd_records_query(qo, out);
    if (synth_corpus->parsed()) return cmd_synth_corpus(sc, g, out);
    if (synth_classes->parsed()) return cmd_synth_classes(scl, g, out);
    if (synth_rec->parsed()) return cmd_synth_recording(sr, g, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << "error: no command\n";
  return kExitUsage;
}

}  // namespace coughsense::cli

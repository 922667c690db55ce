// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "coughsense/risk/records.hpp"
#include "json.hpp"

using namespace coughsense;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& stdin_bytes = "") {
  std::ostringstream out, err;
  std::istringstream in(stdin_bytes);
  Run r;
  r.code = cli::run_cli(args, out, err, in);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::size_t n = 0;
  std::istringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) n += line.rfind(prefix, 0) == 0;
  return n;
}

/// Corpus, trained models and a support bank shared by the tests below.
struct Workspace {
  fs::path dir;
  std::string detector, fewshot, bank, manifest;

  Workspace() : dir(fs::temp_directory_path() / "coughsense_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string corpus = (dir / "corpus").string();
    const std::string classes = (dir / "classes").string();
    manifest = corpus + "/manifest.csv";
    detector = (dir / "models/detector.csnw").string();
    fewshot = (dir / "models/fewshot.csnw").string();
    bank = classes + "/manifest.csv";
    REQUIRE(run({"--seed", "3", "synth", "detector-corpus", "--out-dir", corpus, "--recordings", "12",
                 "--frames", "12", "--max-bursts", "2"})
                .code == 0);
    REQUIRE(run({"--seed", "3", "train-detector", "--manifest", manifest, "--epochs", "4", "-o", detector})
                .code == 0);
    REQUIRE(run({"--seed", "1", "synth", "sound-classes", "--out-dir", classes, "--per-class", "6"}).code ==
            0);
    REQUIRE(run({"--seed", "1", "train-fewshot", "--manifest", bank, "--epochs", "1", "--steps-per-epoch",
                 "2", "--shot", "3", "-o", fewshot})
                .code == 0);
  }

  std::vector<std::string> session_args(const std::string& wav, const std::string& out_dir) const {
    return {"session", wav, "--detector", detector, "--model", fewshot, "--bank", bank,
            "--covid-class", "harmonic", "--timestamp", "2026-03-01T10:00:00Z", "--out-dir", out_dir};
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("features: 2 s of audio gives 61 rows, identical across runs") {
  auto& w = workspace();
  const auto wav = (w.dir / "two_s.wav").string();
  REQUIRE(run({"synth", "recording", "-o", wav, "--frames", "12", "--silent"}).code == 0);
  // 12 detection frames = 5120 + 11 * 2560 = 33280 samples; trim to exactly 2 s
  {
    auto bytes = slurp(wav);
    const std::uint32_t data = 32000 * 2;
    bytes.resize(44 + data);
    for (int i = 0; i < 4; ++i) {
      bytes[4 + i] = static_cast<char>(((36 + data) >> (8 * i)) & 0xff);
      bytes[40 + i] = static_cast<char>((data >> (8 * i)) & 0xff);
    }
    std::ofstream(wav, std::ios::binary) << bytes;
  }
  const auto a = run({"features", wav});
  const auto b = run({"features", wav});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream ss(a.out);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(ss, line)) rows += !line.empty() && line[0] != '#';
  CHECK(rows == 61);

  const auto piped = run({"features", "-"}, slurp(wav));
  CHECK(piped.code == 0);
  CHECK(piped.out == a.out);
}

TEST_CASE("features: corrupt header exits 2 and names the file") {
  auto& w = workspace();
  const auto bad = (w.dir / "corrupt.wav").string();
  std::ofstream(bad) << "RIFX not a wav";
  const auto r = run({"features", bad});
  CHECK(r.code == 2);
  CHECK(r.err.find("corrupt.wav") != std::string::npos);
  CHECK(run({"features", (w.dir / "absent.wav").string()}).code == 2);
}

TEST_CASE("detect: planted bursts are found with millisecond timing") {
  auto& w = workspace();
  const auto wav = (w.dir / "bursts.wav").string();
  const auto made = run({"--seed", "5", "synth", "recording", "-o", wav, "--frames", "20", "--bursts", "2"});
  REQUIRE(made.code == 0);
  std::vector<std::pair<double, double>> planted;
  const std::regex burst_re(R"(burst: start=([0-9.]+) s end=([0-9.]+) s)");
  for (std::sregex_iterator it(made.out.begin(), made.out.end(), burst_re), end; it != end; ++it) {
    planted.emplace_back(std::stod((*it)[1]), std::stod((*it)[2]));
  }
  REQUIRE(planted.size() == 2);

  const auto events_json = (w.dir / "events.json").string();
  const auto r = run({"--timing", "detect", wav, "--model", w.detector, "-o", events_json});
  REQUIRE(r.code == 0);
  const std::regex event_re(R"(event \d+: start=(\d+\.\d{3}) s end=(\d+\.\d{3}) s)");
  std::size_t overlapping = 0, events = 0;
  for (std::sregex_iterator it(r.out.begin(), r.out.end(), event_re), end; it != end; ++it, ++events) {
    const double s = std::stod((*it)[1]), e = std::stod((*it)[2]);
    for (const auto& [ps, pe] : planted) overlapping += s < pe && ps < e;
  }
  CHECK(events >= 1);
  CHECK(overlapping >= 1);
  CHECK(r.out.find("timing: 20 frames") != std::string::npos);
  const auto doc = nlohmann::json::parse(slurp(events_json));
  CHECK(doc["events"].size() == events);
}

TEST_CASE("detect: silence gives zero events with exit 0; missing model exits 2") {
  auto& w = workspace();
  const auto wav = (w.dir / "silence.wav").string();
  REQUIRE(run({"synth", "recording", "-o", wav, "--silent"}).code == 0);
  const auto r = run({"detect", wav, "--model", w.detector});
  CHECK(r.code == 0);
  CHECK(r.out.find("0 events in 20 frames") != std::string::npos);
  CHECK(run({"detect", wav, "--model", (w.dir / "missing.csnw").string()}).code == 2);
}

TEST_CASE("session: silence with fever raises the alert and the cough prompt") {
  auto& w = workspace();
  const auto wav = (w.dir / "silence.wav").string();
  REQUIRE(run({"synth", "recording", "-o", wav, "--silent"}).code == 0);
  const auto out_dir = (w.dir / "records_fever").string();
  auto args = w.session_args(wav, out_dir);
  args.insert(args.end(), {"--temperature", "38.0"});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ALERT AbnormalTemperature") != std::string::npos);
  CHECK(r.out.find("PROMPT: please cough naturally") != std::string::npos);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out_dir)) files += e.path().extension() == ".json";
  CHECK(files == 1);
}

TEST_CASE("session: planted bursts give classified events; one record per run; deterministic") {
  auto& w = workspace();
  const auto wav = (w.dir / "bursts.wav").string();
  REQUIRE(run({"--seed", "5", "synth", "recording", "-o", wav, "--frames", "20", "--bursts", "2"}).code == 0);
  const auto dir_a = (w.dir / "records_a").string(), dir_b = (w.dir / "records_b").string();
  auto args_a = w.session_args(wav, dir_a);
  auto args_b = w.session_args(wav, dir_b);
  for (auto* a : {&args_a, &args_b}) a->insert(a->end(), {"--temperature", "36.5"});
  const auto a = run(args_a);
  const auto b = run(args_b);
  REQUIRE(a.code == 0);
  // identical apart from the record path, which names the output directory
  CHECK(a.out.substr(0, a.out.find("record: ")) == b.out.substr(0, b.out.find("record: ")));

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir_a)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  REQUIRE(files.size() == 1);
  CHECK(slurp(files[0]) == slurp(fs::path(dir_b) / files[0].filename()));
  const auto record = risk::parse_record(slurp(files[0]));
  CHECK(record.events.size() >= 1);
  CHECK(record.risk_score >= 0.0);
  CHECK(record.risk_score <= 1.0);
  CHECK_FALSE(record.has_alert(risk::AlertKind::AbnormalTemperature));

  // the same encounter again is refused rather than overwritten
  CHECK(run(args_a).code == 2);
}

TEST_CASE("session: unknown risk class and bad threshold exit 2") {
  auto& w = workspace();
  const auto wav = (w.dir / "silence.wav").string();
  REQUIRE(run({"synth", "recording", "-o", wav, "--silent"}).code == 0);
  auto args = w.session_args(wav, (w.dir / "records_err").string());
  args[9] = "COVID-19";  // --covid-class value
  CHECK(run(args).code == 2);
  args = w.session_args(wav, (w.dir / "records_err").string());
  args.insert(args.end(), {"--risk-threshold", "1.5"});
  CHECK(run(args).code == 2);
}

TEST_CASE("records query filters the index") {
  auto& w = workspace();
  const auto dir = (w.dir / "records_fever").string();
  const auto r = run({"records", "query", "--dir", dir, "--min-temperature", "37.5"});
  CHECK(r.code == 0);
  CHECK(count_lines(r.out, "2026") == 1);
  CHECK(count_lines(run({"records", "query", "--dir", dir, "--min-risk", "0.5"}).out, "2026") == 0);
  CHECK(run({"records", "query", "--dir", (w.dir / "nowhere").string()}).code == 2);
}

TEST_CASE("classify prints one row per bank class and a prediction") {
  auto& w = workspace();
  const auto r = run({"classify", (w.dir / "classes/tone_001.wav").string(), "--model", w.fewshot, "--bank",
                      w.bank});
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out, "predicted: ") == 1);
  double total = 0.0;
  std::istringstream ss(r.out);
  std::string line;
  std::getline(ss, line);
  for (int i = 0; i < 5; ++i) {
    std::getline(ss, line);
    total += std::stod(line.substr(line.rfind(',') + 1));
  }
  CHECK(std::abs(total - 1.0) < 1e-5);
}

TEST_CASE("eval: --seed 7 twice gives identical tables") {
  auto& w = workspace();
  const std::vector<std::string> args = {"--seed", "7", "eval", "--manifest", w.manifest, "--epochs", "1",
                                         "--folds", "3"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("name,TPR,FPR,", 0) == 0);
  CHECK(count_lines(a.out, "CNN+SVM,") == 1);
}

TEST_CASE("train-detector with 60 epochs logs exactly three learning rates") {
  auto& w = workspace();
  const auto corpus = (w.dir / "tiny").string();
  REQUIRE(run({"--seed", "2", "synth", "detector-corpus", "--out-dir", corpus, "--recordings", "3",
               "--frames", "6", "--max-bursts", "1"})
              .code == 0);
  const auto r = run({"--seed", "2", "train-detector", "--manifest", corpus + "/manifest.csv", "--epochs",
                      "60", "--batch-size", "32", "-o", (w.dir / "tiny.csnw").string()});
  REQUIRE(r.code == 0);
  std::set<std::string> rates;
  const std::regex lr_re(R"(epoch (\d+) lr=(\S+))");
  std::size_t epochs = 0;
  for (std::sregex_iterator it(r.out.begin(), r.out.end(), lr_re), end; it != end; ++it, ++epochs) {
    rates.insert((*it)[2]);
  }
  CHECK(epochs == 60);
  CHECK(rates == std::set<std::string>{"0.01", "0.001", "0.0001"});
}

TEST_CASE("manifest and config errors exit 2 with locations") {
  auto& w = workspace();
  const auto bad = (w.dir / "bad_manifest.csv").string();
  std::ofstream(bad) << "# header\nonly_one_field\n";
  const auto r = run({"train-detector", "--manifest", bad});
  CHECK(r.code == 2);
  CHECK(r.err.find("bad_manifest.csv:2") != std::string::npos);

  const auto cfg = (w.dir / "cfg.json").string();
  std::ofstream(cfg) << R"({"seed": 9, "records": {"query": {"dir": "nowhere_at_all"}}})";
  const auto c = run({"--config", cfg, "records", "query"});
  CHECK(c.code == 2);
  CHECK(c.err.find("\"seed\":\"9\"") != std::string::npos);
  CHECK(c.err.find("nowhere_at_all") != std::string::npos);

  std::ofstream(cfg) << R"({"no_such_option": 1})";
  CHECK(run({"--config", cfg, "records", "query"}).code == 2);
  std::ofstream(cfg) << "{ not json";
  CHECK(run({"--config", cfg, "records", "query"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("help documents every default") {
  const auto r = run({"train-fewshot", "--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("[60]") != std::string::npos);
  CHECK(r.out.find("[0.01]") != std::string::npos);
  CHECK(r.out.find("[3]") != std::string::npos);
}

TEST_CASE("model directory comes from the environment") {
  auto& w = workspace();
  const auto wav = (w.dir / "silence.wav").string();
  REQUIRE(run({"synth", "recording", "-o", wav, "--silent"}).code == 0);
  const auto models = (w.dir / "models").string();
  setenv("COUGHSENSE_MODEL_DIR", models.c_str(), 1);
  const auto r = run({"detect", wav});
  unsetenv("COUGHSENSE_MODEL_DIR");
  CHECK(r.code == 0);
  CHECK(r.err.find(models + "/detector.csnw") != std::string::npos);
}

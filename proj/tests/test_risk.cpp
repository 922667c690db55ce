// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <thread>

#include "coughsense/error.hpp"
#include "coughsense/risk/records.hpp"
#include "fixtures.hpp"

using namespace coughsense;
using namespace fixture;
using namespace coughsense::risk;

namespace fs = std::filesystem;

namespace {

EventRecord event(double start, double dur, double p) { return fixture::covid_event(start, dur, p); }

EncounterRecord base(std::optional<double> temp, std::vector<EventRecord> events) {
  return fixture::encounter(temp, std::move(events));
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("coughsense_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("risk_score examples") {
  CHECK(risk_score({}, "COVID-19") == 0.0);
  CHECK(risk_score({event(0, 0.5, 0.9)}, "COVID-19") == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(risk_score({event(0, 1, 0.8), event(2, 3, 0.4)}, "COVID-19") ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(risk_score({event(0, 1, 0.8)}, "influenza"), InputError);
}

TEST_CASE("risk_score: order invariance, monotonicity, range") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EventRecord> ev;
    for (std::size_t i = 1 + rng() % 5; i > 0; --i) ev.push_back(event(u(rng), 0.05 + u(rng), u(rng)));
    const double s = risk_score(ev, "COVID-19");
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    auto shuffled = ev;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(risk_score(shuffled, "COVID-19") == doctest::Approx(s).epsilon(1e-12));
    auto raised = ev;
    auto& p = raised[rng() % raised.size()].scores[0].probability;
    p = std::min(1.0, p + u(rng));
    CHECK(risk_score(raised, "COVID-19") >= s - 1e-15);
  }
}

TEST_CASE("rules: fever with no cough raises the alert and the prompt") {
  const auto r = apply_rules(base(38.0, {}), RiskConfig{});
  CHECK(r.has_alert(AlertKind::AbnormalTemperature));
  CHECK(r.has_alert(AlertKind::NoCoughCaptured));
  CHECK_FALSE(r.has_alert(AlertKind::HighCovidRisk));
  CHECK(r.prompts_issued == std::vector<std::string>{"please cough naturally"});
  CHECK(r.risk_score == 0.0);
  CHECK(r.complete);
}

TEST_CASE("rules: high COVID-19 probability alone raises HighCovidRisk") {
  const auto r = apply_rules(base(36.5, {event(0.2, 0.4, 0.9)}), RiskConfig{});
  REQUIRE(r.alerts.size() == 1);
  CHECK(r.alerts[0].kind == AlertKind::HighCovidRisk);
  CHECK(r.prompts_issued.empty());
  CHECK(r.risk_score == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("rules: low risk and normal temperature raise nothing") {
  const auto r = apply_rules(base(36.5, {event(0.2, 0.4, 0.1)}), RiskConfig{});
  CHECK(r.alerts.empty());
  CHECK(r.prompts_issued.empty());
}

TEST_CASE("rules: temperature toggles exactly the temperature alert") {
  RiskConfig cfg;
  for (const auto& events : {std::vector<EventRecord>{}, std::vector<EventRecord>{event(0, 1, 0.95)},
                             std::vector<EventRecord>{event(0, 1, 0.2)}}) {
    const auto lo = apply_rules(base(37.29, events), cfg);
    const auto hi = apply_rules(base(37.3, events), cfg);
    CHECK_FALSE(lo.has_alert(AlertKind::AbnormalTemperature));
    CHECK(hi.has_alert(AlertKind::AbnormalTemperature));
    auto without = hi.alerts;
    without.erase(std::remove_if(without.begin(), without.end(),
                                 [](const Alert& a) { return a.kind == AlertKind::AbnormalTemperature; }),
                  without.end());
    CHECK(without == lo.alerts);
    CHECK(hi.prompts_issued == lo.prompts_issued);
  }
}

TEST_CASE("rules: missing temperature marks the record incomplete") {
  const auto r = apply_rules(base(std::nullopt, {event(0, 1, 0.1)}), RiskConfig{});
  CHECK_FALSE(r.complete);
  CHECK(r.alerts.empty());
}

TEST_CASE("rules: threshold edges and configuration checks") {
  RiskConfig cfg;
  cfg.covid_risk_threshold = 0.5;
  CHECK(apply_rules(base(36.0, {event(0, 1, 0.5)}), cfg).has_alert(AlertKind::HighCovidRisk));
  cfg.covid_risk_threshold = 1.5;
  CHECK_THROWS_AS(apply_rules(base(36.0, {}), cfg), InputError);
  cfg = RiskConfig{};
  cfg.fever_threshold_c = NAN;
  CHECK_THROWS_AS(apply_rules(base(36.0, {}), cfg), InputError);
  cfg = RiskConfig{};
  cfg.covid_class = "healthy";
  CHECK(apply_rules(base(36.0, {event(0, 1, 0.1)}), cfg).risk_score == doctest::Approx(0.9));
}

TEST_CASE("emit/parse: 100 randomized records round-trip") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100; ++i) {
    const auto r = random_record(rng);
    const auto text = emit_record(r);
    CHECK(parse_record(text) == r);
    CHECK(emit_record(parse_record(text)) == text);
  }
}

TEST_CASE("emit: schema field first, empty events array present") {
  const auto text = emit_record(apply_rules(base(36.6, {}), RiskConfig{}));
  CHECK(text.find("\"schema\": \"coughsense.encounter/1\"") != std::string::npos);
  CHECK(text.find("\"schema\"") < text.find("\"session_id\""));
  CHECK(text.find("\"events\": []") != std::string::npos);
}

TEST_CASE("emit/parse: errors") {
  auto r = base(36.6, {});
  r.risk_score = NAN;
  CHECK_THROWS_AS(emit_record(r), InputError);
  CHECK_THROWS_AS(parse_record("{"), FormatError);
  CHECK_THROWS_AS(parse_record("[]"), FormatError);
  auto text = emit_record(base(36.6, {}));
  CHECK_THROWS_AS(parse_record(std::string(text).replace(text.find("encounter/1"), 11, "encounter/9")),
                  FormatError);
  CHECK_THROWS_AS(parse_record(std::string(text).replace(text.find("\"complete\""), 10, "\"finished\"")),
                  FormatError);
}

TEST_CASE("session ids are deterministic and file-name safe") {
  const auto a = make_session_id("2026-01-02T03:04:05Z", "abc");
  CHECK(a == make_session_id("2026-01-02T03:04:05Z", "abc"));
  CHECK(a != make_session_id("2026-01-02T03:04:05Z", "abd"));
  CHECK(a.rfind("20260102T030405Z-", 0) == 0);
  CHECK(a.size() == 17 + 8);
  CHECK(utc_timestamp_now().size() == 20);
}

TEST_CASE("record store: append, index, load, query, duplicates") {
  const auto dir = fresh_dir("store");
  RecordStore store(dir.string());
  auto r1 = apply_rules(base(38.2, {}), RiskConfig{});
  r1.session_id = "a1";
  auto r2 = apply_rules(base(std::nullopt, {event(0, 1, 0.9)}), RiskConfig{});
  r2.session_id = "b2";
  store.append(r1);
  store.append(r2);
  CHECK_THROWS_WITH_AS(store.append(r1), doctest::Contains("already recorded"), InputError);
  r1.session_id = "../evil";
  CHECK_THROWS_AS(store.append(r1), InputError);

  const auto idx = store.index();
  REQUIRE(idx.size() == 2);
  CHECK(idx[1].session_id == "b2");
  CHECK_FALSE(idx[1].temperature_c);
  CHECK(store.load("b2") == r2);

  CHECK(query(idx, {.min_risk = 0.5}).size() == 1);
  CHECK(query(idx, {.min_temperature_c = 38.0}).front().session_id == "a1");
  CHECK(query(idx, {.session_id = "zz"}).empty());
  CHECK_THROWS_AS(store.load("nope"), InputError);
  fs::remove_all(dir);
}

TEST_CASE("record store: concurrent appends of distinct sessions") {
  const auto dir = fresh_dir("concurrent");
  RecordStore store(dir.string());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 25; ++i) {
        auto r = base(36.0 + 0.1 * i, {});
        r.session_id = "t" + std::to_string(t) + "_" + std::to_string(i);
        store.append(apply_rules(r, RiskConfig{}));
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto idx = store.index();
  CHECK(idx.size() == 100);
  std::set<std::string> ids;
  for (const auto& e : idx) ids.insert(e.session_id);
  CHECK(ids.size() == 100);
  fs::remove_all(dir);
}

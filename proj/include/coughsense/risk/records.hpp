// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace coughsense::risk {

inline constexpr const char* kSchemaVersion = "coughsense.encounter/1";
inline constexpr const char* kCoughPrompt = "please cough naturally";

enum class AlertKind { AbnormalTemperature, HighCovidRisk, NoCoughCaptured };

const char* to_string(AlertKind kind);
AlertKind alert_kind_from_string(const std::string& s);

struct Alert {
  AlertKind kind = AlertKind::AbnormalTemperature;
  std::string detail;
  bool operator==(const Alert&) const = default;
};

struct ClassProbability {
  std::string class_name;
  double similarity = 0.0;
  double probability = 0.0;
  bool operator==(const ClassProbability&) const = default;
};

/// A detected cough event with its classification.
struct EventRecord {
  double start_s = 0.0;
  double end_s = 0.0;
  double peak_score = 0.0;
  std::string predicted_class;
  std::vector<ClassProbability> scores;

  double duration_s() const { return end_s - start_s; }
  /// Probability of `class_name`; throws InputError when absent.
  double probability_of(const std::string& class_name) const;
  bool operator==(const EventRecord&) const = default;
};

struct Demographics {
  std::optional<int> age;
  std::optional<std::string> sex;
  bool operator==(const Demographics&) const = default;
};

struct EncounterRecord {
  std::string session_id;
  std::string timestamp;  // ISO 8601, UTC
  std::optional<double> temperature_c;
  Demographics demographics;
  std::string location_note;
  std::vector<std::string> audio_refs;
  std::vector<EventRecord> events;
  double risk_score = 0.0;
  std::vector<Alert> alerts;
  std::vector<std::string> prompts_issued;
  bool complete = true;

  bool has_alert(AlertKind kind) const;
  bool operator==(const EncounterRecord&) const = default;
};

struct RiskConfig {
  double fever_threshold_c = 37.3;
  double covid_risk_threshold = 0.7;
  std::string covid_class = "COVID-19";

  /// Throws InputError for a non-finite fever threshold or a risk threshold
  /// outside [0, 1].
  void validate() const;
};

/// Duration-weighted mean of the per-event probability of `covid_class`;
/// 0 when there are no events or the total duration is zero.
double risk_score(const std::vector<EventRecord>& events, const std::string& covid_class);

/// Recomputes the risk score, alerts and prompts from scratch:
///   AbnormalTemperature  iff temperature >= fever threshold
///   NoCoughCaptured      iff no events; also issues the cough prompt
///   HighCovidRisk        iff risk score >= risk threshold
/// A missing temperature marks the record incomplete and skips that rule.
EncounterRecord apply_rules(EncounterRecord record, const RiskConfig& config);

/// Schema-versioned JSON with a fixed field order.
std::string emit_record(const EncounterRecord& record);
/// Throws FormatError on malformed documents or an unknown schema version.
EncounterRecord parse_record(const std::string& text);

/// Deterministic session id from the timestamp and a content fingerprint.
std::string make_session_id(const std::string& timestamp, const std::string& fingerprint);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp_now();

struct IndexEntry {
  std::string session_id;
  std::string path;
  std::optional<double> temperature_c;
  double risk_score = 0.0;
};

/// Append-only directory of `<session_id>.json` records plus `index.tsv`
/// (session_id, path, temperature, risk score). Distinct sessions may be
/// appended concurrently.
class RecordStore {
 public:
  explicit RecordStore(std::string dir);

  /// Writes the record and its index line. Throws InputError when the
  /// session id is already present or unsafe as a file name.
  std::string append(const EncounterRecord& record);
  std::vector<IndexEntry> index() const;
  EncounterRecord load(const std::string& session_id) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  mutable std::mutex mutex_;
};

struct RecordQuery {
  std::optional<double> min_risk = std::nullopt;
  std::optional<double> min_temperature_c = std::nullopt;
  std::optional<std::string> session_id = std::nullopt;
};

std::vector<IndexEntry> query(const std::vector<IndexEntry>& index, const RecordQuery& q);

}  // namespace coughsense::risk

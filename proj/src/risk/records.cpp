// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/risk/records.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coughsense/error.hpp"
#include "json.hpp"

namespace coughsense::risk {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kIndexFile = "index.tsv";

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) throw InputError(std::string("record field '") + field + "' is not finite");
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("record: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("record: field '") + key + "' has the wrong type");
  }
}

void write_all(int fd, const std::string& data, const std::string& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(path + ": write failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

bool safe_id(const std::string& id) {
  if (id.empty() || id[0] == '.') return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  }
  return true;
}

}  // namespace

const char* to_string(AlertKind kind) {
  switch (kind) {
    case AlertKind::AbnormalTemperature:
      return "AbnormalTemperature";
    case AlertKind::HighCovidRisk:
      return "HighCovidRisk";
    case AlertKind::NoCoughCaptured:
      return "NoCoughCaptured";
  }
  return "?";
}

AlertKind alert_kind_from_string(const std::string& s) {
  for (AlertKind k : {AlertKind::AbnormalTemperature, AlertKind::HighCovidRisk,
                      AlertKind::NoCoughCaptured}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("record: unknown alert kind '" + s + "'");
}

double EventRecord::probability_of(const std::string& class_name) const {
  for (const auto& s : scores) {
    if (s.class_name == class_name) return s.probability;
  }
  throw InputError("event at " + std::to_string(start_s) + " s has no probability for class '" +
                   class_name + "'");
}

bool EncounterRecord::has_alert(AlertKind kind) const {
  for (const auto& a : alerts) {
    if (a.kind == kind) return true;
  }
  return false;
}

void RiskConfig::validate() const {
  if (!std::isfinite(fever_threshold_c)) throw InputError("fever threshold must be finite");
  if (!(covid_risk_threshold >= 0.0 && covid_risk_threshold <= 1.0)) {
    throw InputError("risk threshold must lie in [0, 1]");
  }
  if (covid_class.empty()) throw InputError("risk class name must not be empty");
}

double risk_score(const std::vector<EventRecord>& events, const std::string& covid_class) {
  double weighted = 0.0, total = 0.0;
  for (const auto& e : events) {
    const double w = std::max(0.0, e.duration_s());
    weighted += w * e.probability_of(covid_class);
    total += w;
  }
  if (!(total > 0.0)) return 0.0;
  return std::clamp(weighted / total, 0.0, 1.0);
}

EncounterRecord apply_rules(EncounterRecord r, const RiskConfig& config) {
  config.validate();
  r.alerts.clear();
  r.prompts_issued.clear();
  r.risk_score = risk_score(r.events, config.covid_class);
  char buf[160];

  r.complete = r.temperature_c.has_value();
  if (r.temperature_c && *r.temperature_c >= config.fever_threshold_c) {
    std::snprintf(buf, sizeof buf, "temperature %.1f C is at or above %.1f C", *r.temperature_c,
                  config.fever_threshold_c);
    r.alerts.push_back({AlertKind::AbnormalTemperature, buf});
  }
  if (r.events.empty()) {
    r.alerts.push_back({AlertKind::NoCoughCaptured, "no cough event detected"});
    r.prompts_issued.emplace_back(kCoughPrompt);
  }
  if (r.risk_score >= config.covid_risk_threshold) {
    std::snprintf(buf, sizeof buf, "%s risk %.3f is at or above %.3f", config.covid_class.c_str(),
                  r.risk_score, config.covid_risk_threshold);
    r.alerts.push_back({AlertKind::HighCovidRisk, buf});
  }
  return r;
}

std::string emit_record(const EncounterRecord& r) {
  if (r.temperature_c) require_finite(*r.temperature_c, "temperature_c");
  require_finite(r.risk_score, "risk_score");
  Json j;
  j["schema"] = kSchemaVersion;
  j["session_id"] = r.session_id;
  j["timestamp"] = r.timestamp;
  j["temperature_c"] = optional_number(r.temperature_c);
  j["complete"] = r.complete;
  Json demo;
  demo["age"] = r.demographics.age ? Json(*r.demographics.age) : Json(nullptr);
  demo["sex"] = r.demographics.sex ? Json(*r.demographics.sex) : Json(nullptr);
  j["demographics"] = demo;
  j["location_note"] = r.location_note;
  j["audio_refs"] = r.audio_refs;
  Json events = Json::array();
  for (const auto& e : r.events) {
    require_finite(e.start_s, "events.start_s");
    require_finite(e.end_s, "events.end_s");
    require_finite(e.peak_score, "events.peak_score");
    Json je;
    je["start_s"] = e.start_s;
    je["end_s"] = e.end_s;
    je["peak_score"] = e.peak_score;
    je["predicted_class"] = e.predicted_class;
    Json scores = Json::array();
    for (const auto& s : e.scores) {
      require_finite(s.similarity, "events.scores.similarity");
      require_finite(s.probability, "events.scores.probability");
      Json js;
      js["class"] = s.class_name;
      js["similarity"] = s.similarity;
      js["probability"] = s.probability;
      scores.push_back(js);
    }
    je["scores"] = scores;
    events.push_back(je);
  }
  j["events"] = events;
  j["risk_score"] = r.risk_score;
  Json alerts = Json::array();
  for (const auto& a : r.alerts) {
    Json ja;
    ja["kind"] = to_string(a.kind);
    ja["detail"] = a.detail;
    alerts.push_back(ja);
  }
  j["alerts"] = alerts;
  j["prompts_issued"] = r.prompts_issued;
  return j.dump(2) + "\n";
}

EncounterRecord parse_record(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("record: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("record: top level must be an object");
  const auto schema = get_field<std::string>(j, "schema");
  if (schema != kSchemaVersion) throw FormatError("record: unsupported schema '" + schema + "'");

  EncounterRecord r;
  r.session_id = get_field<std::string>(j, "session_id");
  r.timestamp = get_field<std::string>(j, "timestamp");
  if (!j.contains("temperature_c")) throw FormatError("record: missing field 'temperature_c'");
  if (!j["temperature_c"].is_null()) r.temperature_c = get_field<double>(j, "temperature_c");
  r.complete = get_field<bool>(j, "complete");
  const auto demo = get_field<Json>(j, "demographics");
  if (demo.contains("age") && !demo["age"].is_null()) r.demographics.age = get_field<int>(demo, "age");
  if (demo.contains("sex") && !demo["sex"].is_null()) {
    r.demographics.sex = get_field<std::string>(demo, "sex");
  }
  r.location_note = get_field<std::string>(j, "location_note");
  r.audio_refs = get_field<std::vector<std::string>>(j, "audio_refs");
  for (const auto& je : get_field<Json>(j, "events")) {
    EventRecord e;
    e.start_s = get_field<double>(je, "start_s");
    e.end_s = get_field<double>(je, "end_s");
    e.peak_score = get_field<double>(je, "peak_score");
    e.predicted_class = get_field<std::string>(je, "predicted_class");
    for (const auto& js : get_field<Json>(je, "scores")) {
      e.scores.push_back({get_field<std::string>(js, "class"), get_field<double>(js, "similarity"),
                          get_field<double>(js, "probability")});
    }
    r.events.push_back(std::move(e));
  }
  r.risk_score = get_field<double>(j, "risk_score");
  for (const auto& ja : get_field<Json>(j, "alerts")) {
    r.alerts.push_back({alert_kind_from_string(get_field<std::string>(ja, "kind")),
                        get_field<std::string>(ja, "detail")});
  }
  r.prompts_issued = get_field<std::vector<std::string>>(j, "prompts_issued");
  return r;
}

std::string make_session_id(const std::string& timestamp, const std::string& fingerprint) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : timestamp + "|" + fingerprint) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::string stamp;
  for (char c : timestamp) {
    if (std::isalnum(static_cast<unsigned char>(c))) stamp += c;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return (stamp.empty() ? std::string("session") : stamp) + "-" + std::string(hex, 8);
}

std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RecordStore::RecordStore(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw InputError(dir_ + ": cannot create record directory: " + ec.message());
}

std::string RecordStore::append(const EncounterRecord& record) {
  if (!safe_id(record.session_id)) {
    throw InputError("record store: unsafe session id '" + record.session_id + "'");
  }
  const std::string text = emit_record(record);
  const std::string path = (std::filesystem::path(dir_) / (record.session_id + ".json")).string();

  std::lock_guard<std::mutex> lock(mutex_);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw InputError(path + ": session already recorded");
    throw InputError(path + ": cannot create: " + std::strerror(errno));
  }
  try {
    write_all(fd, text, path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);

  char temp[32] = "NA";
  if (record.temperature_c) std::snprintf(temp, sizeof temp, "%.2f", *record.temperature_c);
  char risk[32];
  std::snprintf(risk, sizeof risk, "%.6f", record.risk_score);
  const std::string line = record.session_id + "\t" + path + "\t" + temp + "\t" + risk + "\n";
  const std::string index_path = (std::filesystem::path(dir_) / kIndexFile).string();
  // a single O_APPEND write keeps concurrent index lines intact
  const int ifd = ::open(index_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (ifd < 0) throw InputError(index_path + ": cannot open: " + std::strerror(errno));
  try {
    write_all(ifd, line, index_path);
  } catch (...) {
    ::close(ifd);
    throw;
  }
  ::close(ifd);
  return path;
}

std::vector<IndexEntry> RecordStore::index() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<IndexEntry> out;
  const std::string index_path = (std::filesystem::path(dir_) / kIndexFile).string();
  std::ifstream in(index_path);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) {
      throw FormatError(index_path + ":" + std::to_string(lineno) + ": expected 4 columns");
    }
    IndexEntry e;
    e.session_id = cols[0];
    e.path = cols[1];
    try {
      if (cols[2] != "NA") e.temperature_c = std::stod(cols[2]);
      e.risk_score = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw FormatError(index_path + ":" + std::to_string(lineno) + ": bad number");
    }
    out.push_back(std::move(e));
  }
  return out;
}

EncounterRecord RecordStore::load(const std::string& session_id) const {
  if (!safe_id(session_id)) throw InputError("record store: unsafe session id '" + session_id + "'");
  const std::string path = (std::filesystem::path(dir_) / (session_id + ".json")).string();
  std::ifstream in(path);
  if (!in) throw InputError(path + ": no such record");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_record(ss.str());
}

std::vector<IndexEntry> query(const std::vector<IndexEntry>& index, const RecordQuery& q) {
  std::vector<IndexEntry> out;
  for (const auto& e : index) {
    if (q.session_id && e.session_id != *q.session_id) continue;
    if (q.min_risk && e.risk_score < *q.min_risk) continue;
    if (q.min_temperature_c && (!e.temperature_c || *e.temperature_c < *q.min_temperature_c)) continue;
    out.push_back(e);
  }
  return out;
}

}  // namespace coughsense::risk

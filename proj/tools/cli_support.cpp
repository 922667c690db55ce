// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_support.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "coughsense/error.hpp"
#include "json.hpp"

namespace coughsense::cli {

using Json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void walk(const Json& node, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : node.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (value.is_object()) {
      auto sub = parents;
      sub.push_back(name);
      walk(value, sub, out);
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = name;
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar_text(v));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar_text(value));
    }
    out.push_back(std::move(item));
  }
}

Json materialize(const CLI::App* app) {
  Json j = Json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (!opt->get_configurable()) continue;
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const auto& results = opt->results();
    if (!results.empty()) {
      j[name] = results.size() == 1 ? Json(results.front()) : Json(results);
    } else if (opt->get_expected_min() == 0) {
      j[name] = false;  // unset flag
    } else {
      const std::string def = opt->get_default_str();
      j[name] = def.empty() ? Json(nullptr) : Json(def);
    }
  }
  for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = materialize(sub);
  return j;
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return materialize(app).dump();
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  Json j;
  try {
    input >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: top level must be a JSON object");
  std::vector<CLI::ConfigItem> items;
  walk(j, {}, items);
  return items;
}

std::vector<ManifestRow> read_manifest(const std::string& path, std::size_t fields) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open manifest");
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    ManifestRow row;
    row.line = lineno;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.fields.push_back(trim(cell));
    if (!t.empty() && t.back() == ',') row.fields.emplace_back();
    if (row.fields.size() != fields) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(fields) +
                       " comma-separated fields, found " + std::to_string(row.fields.size()));
    }
    for (std::size_t i = 0; i < fields; ++i) {
      if (row.fields[i].empty()) {
        throw InputError(path + ":" + std::to_string(lineno) + ": field " + std::to_string(i + 1) +
                         " is empty");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": manifest has no entries");
  return rows;
}

std::string resolve_path(const std::string& manifest, const std::string& entry) {
  const std::filesystem::path p(entry);
  if (p.is_absolute()) return entry;
  return (std::filesystem::path(manifest).parent_path() / p).string();
}

std::vector<int> read_label_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open label track");
  std::vector<int> labels;
  std::string tok;
  while (in >> tok) {
    if (tok != "0" && tok != "1") throw InputError(path + ": label '" + tok + "' is not 0 or 1");
    labels.push_back(tok == "1");
  }
  return labels;
}

void write_label_track(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < labels.size(); ++i) out << labels[i] << (i + 1 == labels.size() ? '\n' : ' ');
  if (labels.empty()) out << '\n';
}

std::vector<detector::LabeledRecording> load_detector_manifest(const std::string& path) {
  std::vector<detector::LabeledRecording> corpus;
  for (const auto& row : read_manifest(path, 2)) {
    const std::string where = path + ":" + std::to_string(row.line) + ": ";
    detector::LabeledRecording r;
    r.name = row.fields[0];
    try {
      r.audio = dsp::load_audio(resolve_path(path, row.fields[0]));
      r.frame_labels = read_label_track(resolve_path(path, row.fields[1]));
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
    const std::size_t frames = dsp::frame_count(r.audio.size(), dsp::detection_frame_spec());
    if (r.frame_labels.size() != frames) {
      throw InputError(where + std::to_string(r.frame_labels.size()) + " labels for " +
                       std::to_string(frames) + " detection frames");
    }
    corpus.push_back(std::move(r));
  }
  return corpus;
}

fewshot::Dataset load_class_manifest(const std::string& path) {
  fewshot::Dataset data;
  std::map<std::string, std::size_t> ids;
  for (const auto& row : read_manifest(path, 2)) {
    const auto [it, added] = ids.emplace(row.fields[0], data.class_names.size());
    if (added) data.class_names.push_back(row.fields[0]);
    try {
      data.items.push_back(load_spectrogram(resolve_path(path, row.fields[1])));
    } catch (const InputError& e) {
      throw InputError(path + ":" + std::to_string(row.line) + ": " + e.what());
    }
    data.labels.push_back(it->second);
  }
  return data;
}

dsp::Spectrogram load_spectrogram(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".wav") return dsp::spectrogram(dsp::load_audio(path));
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  return dsp::read_spectrogram(in, path);
}

std::string audio_fingerprint(const dsp::AudioBuffer& audio) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&audio.sample_rate_hz, sizeof audio.sample_rate_hz);
  for (double s : audio.samples) mix(&s, sizeof s);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coughsense::cli

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coughsense/audio.hpp"
#include "coughsense/detector/detector.hpp"
#include "coughsense/features.hpp"
#include "coughsense/fewshot/fewshot.hpp"

namespace coughsense::cli {

/// JSON config files for CLI11. Top-level keys set global options, nested
/// objects named after a subcommand set that subcommand's options. Keys are
/// long option names; underscores are accepted for dashes.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

struct ManifestRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Comma-separated rows with exactly `fields` columns. Blank lines and lines
/// starting with '#' are skipped. Errors carry "path:line".
std::vector<ManifestRow> read_manifest(const std::string& path, std::size_t fields);

/// Resolves `entry` against the directory of `manifest` unless absolute.
std::string resolve_path(const std::string& manifest, const std::string& entry);

/// Whitespace-separated 0/1 values, one per detection frame.
std::vector<int> read_label_track(const std::string& path);
void write_label_track(const std::string& path, const std::vector<int>& labels);

/// Rows: wav_path,label_path.
std::vector<detector::LabeledRecording> load_detector_manifest(const std::string& path);

/// Rows: class_name,path where path is a WAV or a spectrogram dump. Class ids
/// follow first appearance.
fewshot::Dataset load_class_manifest(const std::string& path);

/// Spectrogram of a whole WAV file, or a spectrogram dump read as-is.
dsp::Spectrogram load_spectrogram(const std::string& path);

/// 16-hex-digit FNV-1a digest of the samples.
std::string audio_fingerprint(const dsp::AudioBuffer& audio);

}  // namespace coughsense::cli

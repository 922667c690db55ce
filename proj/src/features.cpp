// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "coughsense/error.hpp"

namespace coughsense::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t fft_len, int sample_rate_hz)
    : num_bins_(fft_len / 2 + 1), weights_(kNumMelFilters * (fft_len / 2 + 1), 0.0) {
  const double top_hz = std::min(kMelMaxHz, sample_rate_hz / 2.0);
  const double top_mel = hz_to_mel(top_hz);
  std::array<double, kNumMelFilters + 2> edges{};
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top_mel * static_cast<double>(i) / static_cast<double>(kNumMelFilters + 1));
  }
  for (std::size_t m = 0; m < kNumMelFilters; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < num_bins_; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(fft_len);
      double w = 0.0;
      if (f > lo && f <= centre) {
        w = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        w = (hi - f) / (hi - centre);
      }
      weights_[m * num_bins_ + k] = w;
    }
  }
}

std::array<double, kNumMelFilters> MelFilterbank::apply(std::span<const double> power) const {
  if (power.size() != num_bins_) {
    throw ShapeError("mel filterbank: expected " + std::to_string(num_bins_) + " bins, got " +
                     std::to_string(power.size()));
  }
  std::array<double, kNumMelFilters> out{};
  for (std::size_t m = 0; m < kNumMelFilters; ++m) {
    const double* w = weights_.data() + m * num_bins_;
    double acc = 0.0;
    for (std::size_t k = 0; k < num_bins_; ++k) acc += w[k] * power[k];
    out[m] = acc;
  }
  return out;
}

Cepstrum dct_cepstrum(const std::array<double, kNumMelFilters>& log_energies) {
  Cepstrum c{};
  const double m = static_cast<double>(kNumMelFilters);
  for (std::size_t n = 0; n < kNumCepstra; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kNumMelFilters; ++j) {
      acc += log_energies[j] *
             std::cos(std::numbers::pi * static_cast<double>(n) * (static_cast<double>(j) + 0.5) / m);
    }
    const double scale = n == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    c[n] = scale * acc;
  }
  return c;
}

namespace {

const MelFilterbank& filterbank_for(int sample_rate_hz) {
  // the pipeline almost always runs at 16 kHz
  static const MelFilterbank fb16(kMfccFrameLen, kTargetRateHz);
  if (sample_rate_hz == kTargetRateHz) return fb16;
  thread_local int cached_rate = 0;
  thread_local std::unique_ptr<MelFilterbank> cached;
  if (cached_rate != sample_rate_hz || !cached) {
    cached = std::make_unique<MelFilterbank>(kMfccFrameLen, sample_rate_hz);
    cached_rate = sample_rate_hz;
  }
  return *cached;
}

}  // namespace

Cepstrum mfcc(std::span<const double> windowed_frame, int sample_rate_hz) {
  if (windowed_frame.size() > kMfccFrameLen) {
    throw InputError("mfcc: frame longer than " + std::to_string(kMfccFrameLen) + " samples");
  }
  if (sample_rate_hz <= 0) throw InputError("mfcc: sample rate must be positive");
  std::vector<double> padded(kMfccFrameLen, 0.0);
  std::copy(windowed_frame.begin(), windowed_frame.end(), padded.begin());
  std::vector<double> power = fft_magnitude(padded);
  for (double& v : power) v *= v;
  auto energies = filterbank_for(sample_rate_hz).apply(power);
  for (double& e : energies) e = std::log(std::max(e, kLogFloor));
  return dct_cepstrum(energies);
}

std::vector<CepstrumWithDeltas> mfcc_deltas(const std::vector<Cepstrum>& track) {
  const std::size_t n = track.size();
  std::vector<CepstrumWithDeltas> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(track[t].begin(), track[t].end(), out[t].begin());
  }
  if (n < 3) return out;  // deltas stay zero

  auto diff = [n](auto&& get, std::size_t t, std::size_t d) {
    const std::size_t prev = t == 0 ? 0 : t - 1;
    const std::size_t next = std::min(t + 1, n - 1);
    return (get(next, d) - get(prev, d)) / 2.0;
  };
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < kNumCepstra; ++d) {
      out[t][kNumCepstra + d] = diff([&](std::size_t i, std::size_t j) { return track[i][j]; }, t, d);
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < kNumCepstra; ++d) {
      out[t][2 * kNumCepstra + d] =
          diff([&](std::size_t i, std::size_t j) { return out[i][kNumCepstra + j]; }, t, d);
    }
  }
  return out;
}

double zero_crossing_rate(std::span<const double> frame) {
  if (frame.size() < 2) throw InputError("zero_crossing_rate: need at least 2 samples");
  std::size_t flips = 0;
  for (std::size_t t = 1; t < frame.size(); ++t) {
    if (frame[t] * frame[t - 1] < 0.0) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(frame.size() - 1);
}

double energy(std::span<const double> frame) {
  if (frame.empty()) throw InputError("energy: empty frame");
  double acc = 0.0;
  for (double v : frame) acc += v * v;
  return std::sqrt(acc / static_cast<double>(frame.size()));
}

double crest_factor(std::span<const double> frame) {
  const double rms = energy(frame);
  if (rms == 0.0) return 0.0;
  double peak = 0.0;
  for (double v : frame) peak = std::max(peak, std::abs(v));
  return peak / rms;
}

std::array<double, kFeatureDim> FrameFeatures::as_array() const {
  std::array<double, kFeatureDim> out{};
  std::copy(mfcc.begin(), mfcc.end(), out.begin());
  out[kNumMfccWithDeltas] = zcr;
  out[kNumMfccWithDeltas + 1] = crest_factor;
  out[kNumMfccWithDeltas + 2] = energy;
  return out;
}

std::vector<FrameFeatures> extract_features(const AudioBuffer& buffer, const FrameSpec& spec) {
  buffer.validate();
  const std::size_t count = frame_count(buffer.size(), spec);
  if (count == 0) {
    throw InputError("input too short: " + std::to_string(buffer.size()) +
                     " samples, need at least " + std::to_string(spec.frame_len_samples));
  }
  const auto window = window_coefficients(spec.window, spec.frame_len_samples);
  std::vector<Cepstrum> track(count);
  std::vector<FrameFeatures> out(count);
  std::vector<double> windowed(spec.frame_len_samples);
  for (std::size_t k = 0; k < count; ++k) {
    const auto raw = std::span<const double>(buffer.samples)
                         .subspan(k * spec.hop_samples, spec.frame_len_samples);
    for (std::size_t n = 0; n < raw.size(); ++n) windowed[n] = raw[n] * window[n];
    track[k] = mfcc(windowed, buffer.sample_rate_hz);
    out[k].index = k;
    out[k].start_time_s = static_cast<double>(k * spec.hop_samples) / buffer.sample_rate_hz;
    out[k].zcr = zero_crossing_rate(raw);
    out[k].crest_factor = crest_factor(raw);
    out[k].energy = energy(raw);
  }
  const auto with_deltas = mfcc_deltas(track);
  for (std::size_t k = 0; k < count; ++k) out[k].mfcc = with_deltas[k];
  return out;
}

Spectrogram spectrogram(const AudioBuffer& buffer, const FrameSpec& spec, double origin_time_s) {
  buffer.validate();
  const auto frames = frame_signal(buffer, spec);
  Spectrogram s;
  s.frame_spec = spec;
  s.origin_time_s = origin_time_s;
  s.frames = frames.size();
  s.d_freq = next_power_of_two(spec.frame_len_samples) / 2 + 1;
  s.data.resize(s.d_freq * s.frames);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto mag = padded_fft_magnitude(frames[t]);
    for (std::size_t f = 0; f < s.d_freq; ++f) s.at(f, t) = std::log(mag[f] + kLogFloor);
  }
  return s;
}

namespace {

void put_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out << buf;
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no, const std::string& name) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
    }
  }
  return values;
}

}  // namespace

void write_feature_dump(std::ostream& out, const std::vector<FrameFeatures>& features) {
  out << "# frame_index,start_time_s";
  for (std::size_t d = 0; d < kNumMfccWithDeltas; ++d) out << ",mfcc_" << d;
  out << ",zcr,crest,energy\n";
  for (const auto& f : features) {
    out << f.index << ',';
    put_number(out, f.start_time_s);
    for (const auto& v : f.as_array()) {
      out << ',';
      put_number(out, v);
    }
    out << '\n';
  }
}

std::vector<FrameFeatures> read_feature_dump(std::istream& in) {
  std::vector<FrameFeatures> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto row = parse_row(line, line_no, "feature dump");
    if (row.size() != 2 + kFeatureDim) {
      throw FormatError("feature dump:" + std::to_string(line_no) + ": expected " +
                        std::to_string(2 + kFeatureDim) + " fields, got " +
                        std::to_string(row.size()));
    }
    FrameFeatures f;
    f.index = static_cast<std::size_t>(row[0]);
    f.start_time_s = row[1];
    std::copy(row.begin() + 2, row.begin() + 2 + kNumMfccWithDeltas, f.mfcc.begin());
    f.zcr = row[2 + kNumMfccWithDeltas];
    f.crest_factor = row[3 + kNumMfccWithDeltas];
    f.energy = row[4 + kNumMfccWithDeltas];
    out.push_back(f);
  }
  return out;
}

void write_spectrogram(std::ostream& out, const Spectrogram& s) {
  out << "# spectrogram d_freq=" << s.d_freq << " frames=" << s.frames
      << " frame_len=" << s.frame_spec.frame_len_samples << " hop=" << s.frame_spec.hop_samples
      << " window=" << (s.frame_spec.window == Window::Hamming ? "hamming" : "rectangular")
      << " origin_s=";
  put_number(out, s.origin_time_s);
  out << '\n';
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t f = 0; f < s.d_freq; ++f) {
      if (f) out << ',';
      put_number(out, s.at(f, t));
    }
    out << '\n';
  }
}

Spectrogram read_spectrogram(std::istream& in, const std::string& name) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# spectrogram", 0) != 0) {
    throw FormatError(name + ": missing '# spectrogram' header");
  }
  Spectrogram s;
  s.frame_spec = feature_frame_spec();
  std::stringstream hs(header.substr(13));
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      if (key == "d_freq") s.d_freq = std::stoul(value);
      else if (key == "frames") s.frames = std::stoul(value);
      else if (key == "frame_len") s.frame_spec.frame_len_samples = std::stoul(value);
      else if (key == "hop") s.frame_spec.hop_samples = std::stoul(value);
      else if (key == "window") s.frame_spec.window = value == "hamming" ? Window::Hamming : Window::Rectangular;
      else if (key == "origin_s") s.origin_time_s = std::stod(value);
    } catch (const std::exception&) {
      throw FormatError(name + ": bad header value for " + key);
    }
  }
  if (s.d_freq == 0 || s.frames == 0) throw FormatError(name + ": header lacks d_freq/frames");
  s.data.assign(s.d_freq * s.frames, 0.0);
  std::string line;
  std::size_t t = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (t >= s.frames) throw FormatError(name + ":" + std::to_string(line_no) + ": too many rows");
    const auto row = parse_row(line, line_no, name);
    if (row.size() != s.d_freq) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(s.d_freq) + " values");
    }
    for (std::size_t f = 0; f < s.d_freq; ++f) s.at(f, t) = row[f];
    ++t;
  }
  if (t != s.frames) throw FormatError(name + ": expected " + std::to_string(s.frames) + " rows");
  return s;
}

}  // namespace coughsense::dsp

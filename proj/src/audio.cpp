// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "coughsense/error.hpp"

namespace coughsense::dsp {

void AudioBuffer::validate() const {
  if (sample_rate_hz <= 0) {
    throw InputError("audio buffer: sample rate must be positive, got " +
                     std::to_string(sample_rate_hz));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw InputError("audio buffer: non-finite sample at index " +
                       std::to_string(i));
    }
  }
}

namespace {

std::vector<double> lowpass_kernel(double cutoff_cycles_per_sample,
                                   std::size_t half_width) {
  const std::size_t taps = 2 * half_width + 1;
  std::vector<double> h(taps);
  const double pi = std::numbers::pi;
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - static_cast<double>(half_width);
    const double sinc = m == 0.0 ? 2.0 * cutoff_cycles_per_sample
                                 : std::sin(2.0 * pi * cutoff_cycles_per_sample * m) / (pi * m);
    const double x = static_cast<double>(i) / static_cast<double>(taps - 1);
    const double blackman =
        0.42 - 0.5 * std::cos(2.0 * pi * x) + 0.08 * std::cos(4.0 * pi * x);
    h[i] = sinc * blackman;
    sum += h[i];
  }
  for (double& v : h) v /= sum;  // unit DC gain
  return h;
}

// Convolution with edge replication, so constant signals stay constant.
std::vector<double> filter_replicate(const std::vector<double>& x,
                                     const std::vector<double>& h) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  std::vector<double> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i - k, 0, n - 1);
      acc += h[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& buffer, int target_rate_hz) {
  if (target_rate_hz <= 0) {
    throw InputError("resample: target rate must be positive");
  }
  buffer.validate();
  AudioBuffer out;
  out.sample_rate_hz = target_rate_hz;
  if (buffer.empty()) return out;
  if (buffer.sample_rate_hz == target_rate_hz) {
    out.samples = buffer.samples;
    return out;
  }

  const auto src_rate = static_cast<std::uint64_t>(buffer.sample_rate_hz);
  const auto dst_rate = static_cast<std::uint64_t>(target_rate_hz);

  std::vector<double> source = buffer.samples;
  if (dst_rate < src_rate) {
    const double ratio = static_cast<double>(src_rate) / static_cast<double>(dst_rate);
    const double cutoff = 0.45 / ratio;
    const auto half_width = static_cast<std::size_t>(16.0 * std::ceil(ratio));
    source = filter_replicate(source, lowpass_kernel(cutoff, half_width));
  }

  const std::uint64_t out_len = buffer.size() * dst_rate / src_rate;
  out.samples.resize(out_len);
  const std::size_t last = source.size() - 1;
  for (std::uint64_t n = 0; n < out_len; ++n) {
    // exact integer position when the ratio is integral
    const std::uint64_t num = n * src_rate;
    const std::size_t i0 = static_cast<std::size_t>(num / dst_rate);
    const double frac = static_cast<double>(num % dst_rate) / static_cast<double>(dst_rate);
    const std::size_t i1 = std::min(i0 + 1, last);
    const double a = source[std::min(i0, last)];
    out.samples[n] = frac == 0.0 ? a : a + frac * (source[i1] - a);
  }
  return out;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer read_wav(std::istream& in, const std::string& name) {
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  auto fail = [&](const std::string& why) -> InputError {
    return InputError(name + ": invalid WAV file: " + why);
  };

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw fail("missing RIFF/WAVE header");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > size) throw fail("truncated fmt chunk");
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      if (format == 0xFFFE && chunk_size >= 40 && body + 26 <= size) {
        format = read_u16(data + body + 24);  // WAVE_FORMAT_EXTENSIBLE subformat
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      // streamed WAVs sometimes carry a bogus size; trust what is present
      pcm_bytes = std::min<std::size_t>(chunk_size, size - body);
      break;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }

  if (!have_fmt) throw fail("no fmt chunk");
  if (pcm == nullptr) throw fail("no data chunk");
  if (format != 1) throw fail("unsupported encoding (only PCM is supported)");
  if (bits != 16) throw fail("unsupported bit depth " + std::to_string(bits));
  if (channels == 0) throw fail("zero channels");
  if (rate == 0) throw fail("zero sample rate");

  AudioBuffer out;
  out.sample_rate_hz = static_cast<int>(rate);
  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = pcm_bytes / frame_bytes;
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto raw = static_cast<std::int16_t>(read_u16(pcm + i * frame_bytes));
    out.samples[i] = static_cast<double>(raw) / 32768.0;
  }
  return out;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  return read_wav(in, path);
}

AudioBuffer load_audio(const std::string& path) {
  return resample(read_wav(path), kTargetRateHz);
}

void write_wav(std::ostream& out, const AudioBuffer& buffer) {
  buffer.validate();
  const auto data_bytes = static_cast<std::uint32_t>(buffer.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put_u32(s, 36 + data_bytes);
  s += "WAVE";
  s += "fmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, 1);
  put_u32(s, static_cast<std::uint32_t>(buffer.sample_rate_hz));
  put_u32(s, static_cast<std::uint32_t>(buffer.sample_rate_hz) * 2);
  put_u16(s, 2);
  put_u16(s, 16);
  s += "data";
  put_u32(s, data_bytes);
  for (double v : buffer.samples) {
    const double c = std::clamp(v, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
    put_u16(s, static_cast<std::uint16_t>(q));
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_wav(const std::string& path, const AudioBuffer& buffer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open for writing");
  write_wav(out, buffer);
}

}  // namespace coughsense::dsp

// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "coughsense/error.hpp"

namespace coughsense::nn {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; add byte swapping for this target");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("weight file truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const std::vector<NamedTensor>& entries) {
  std::string out(kWeightMagic, 4);
  put_u32(out, kWeightFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(e.tensor.data()), e.tensor.size() * sizeof(double));
  }
  return out;
}

std::vector<NamedTensor> decode_weights(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string_view(kWeightMagic, 4)) {
    throw FormatError("not a weight file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version) +
                      " (expected " + std::to_string(kWeightFormatVersion) + ")");
  }
  const std::uint32_t count = r.u32("entry count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    const std::uint32_t name_len = r.u32("name length");
    e.name = std::string(r.take(name_len, "name"));
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError("entry '" + e.name + "': bad rank");
    Shape shape;
    std::size_t elems = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("shape");
      if (dim == 0) throw FormatError("entry '" + e.name + "': zero dimension");
      shape.push_back(dim);
      elems *= dim;
    }
    r.need(elems * sizeof(double), "tensor data");
    std::vector<double> data(elems);
    const auto raw = r.take(elems * sizeof(double), "tensor data");
    std::memcpy(data.data(), raw.data(), raw.size());
    e.tensor = Tensor(std::move(shape), std::move(data));
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<NamedTensor> collect_state(const ParamRegistry& reg) {
  std::vector<NamedTensor> out;
  out.reserve(reg.state.size());
  for (const auto& s : reg.state) out.push_back({s.name, *s.tensor});
  return out;
}

const Tensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return e.tensor;
  }
  throw FormatError("weight file has no entry for layer '" + name + "'");
}

void restore_state(const std::vector<NamedTensor>& entries, ParamRegistry& reg) {
  for (const auto& s : reg.state) {
    const Tensor& src = find_entry(entries, s.name);
    if (src.shape() != s.tensor->shape()) {
      throw FormatError("layer '" + s.name + "': shape mismatch, file has " +
                        shape_string(src.shape()) + ", model expects " +
                        shape_string(s.tensor->shape()));
    }
    *s.tensor = src;
  }
}

std::string read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError(path + ": write failed");
}

}  // namespace coughsense::nn

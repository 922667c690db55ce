// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "coughsense/nn/layers.hpp"
#include "coughsense/nn/tensor.hpp"

namespace coughsense::nn {

// Weight file layout, all integers little-endian:
//   "CSNW"  u32 version  u32 entry_count
//   per entry: u32 name_len, name bytes, u32 rank, rank x u32 dims,
//              product(dims) x f64 data
inline constexpr char kWeightMagic[4] = {'C', 'S', 'N', 'W'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::string encode_weights(const std::vector<NamedTensor>& entries);

/// Throws FormatError on bad magic, unknown version or truncation.
std::vector<NamedTensor> decode_weights(std::string_view bytes);

/// Snapshot of every registered parameter and buffer.
std::vector<NamedTensor> collect_state(const ParamRegistry& reg);

/// Copies entries into the registry by name. Every registered tensor must be
/// present with the same shape; extra entries are ignored.
void restore_state(const std::vector<NamedTensor>& entries, ParamRegistry& reg);

/// Finds an entry or throws FormatError naming it.
const Tensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name);

std::string read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::string_view bytes);

}  // namespace coughsense::nn

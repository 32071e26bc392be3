// Copyright 2026 The LENS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lens/tensor.hpp"

// TensorFile layout, all integers little-endian:
//   "LTNS" | u32 version = 1 | u8 dtype | u8 rank | rank x u32 dims |
//   row-major payload | u32 CRC32(payload)
namespace lens::io {

inline constexpr std::uint32_t kTensorFileVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

std::size_t dtype_size(DType dtype);

class TensorFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public TensorFileError {
 public:
  using TensorFileError::TensorFileError;
};
class BadVersionError : public TensorFileError {
 public:
  using TensorFileError::TensorFileError;
};
/// Payload corruption or truncation.
class ChecksumError : public TensorFileError {
 public:
  using TensorFileError::TensorFileError;
};
/// Structurally invalid header: rank 0, unknown dtype, trailing bytes.
class FormatError : public TensorFileError {
 public:
  using TensorFileError::TensorFileError;
};

struct StoredTensor {
  Tensor tensor;
  DType dtype = DType::kFloat64;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor, DType dtype = DType::kFloat64);
StoredTensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor,
                  DType dtype = DType::kFloat64);
StoredTensor read_tensor(const std::filesystem::path& path);

/// Binary P5 image, maxval 255, byte = round-half-up(255 v) clamped to [0, 255].
std::string encode_pgm(const Tensor& map);
void export_pgm(const Tensor& map, const std::filesystem::path& path);

/// Exact bytes of a file; throws std::runtime_error if it cannot be read.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lens::io

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

#include "lens/interchange.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lens::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'T', 'N', 'S'};
constexpr std::size_t kMaxRank = 3;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return std::uint64_t{get_u32(p)} | std::uint64_t{get_u32(p + 4)} << 32;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay within range.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = crc32(crc, bytes.data() + offset, n);
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

DType parse_dtype(std::uint8_t code) {
  if (code == 1) return DType::kFloat32;
  if (code == 2) return DType::kFloat64;
  throw FormatError("tensor file: unknown dtype code " + std::to_string(code));
}

}  // namespace

std::size_t dtype_size(DType dtype) { return dtype == DType::kFloat32 ? 4 : 8; }

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor, DType dtype) {
  if (tensor.empty()) throw FormatError("tensor file: cannot encode a rank-0 tensor");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kTensorFileVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  for (std::size_t d : tensor.dims()) {
    if (d > 0xffffffffu) throw FormatError("tensor file: extent exceeds 32 bits");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  const std::size_t payload_start = out.size();
  out.reserve(payload_start + tensor.size() * dtype_size(dtype) + 4);
  for (double v : tensor.data()) {
    if (dtype == DType::kFloat32) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  put_u32(out, crc32_of(std::span(out).subspan(payload_start)));
  return out;
}

StoredTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError("tensor file: bad magic (expected LTNS)");
  }
  if (bytes.size() < 10) throw ChecksumError("tensor file: truncated header");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kTensorFileVersion) {
    throw BadVersionError("tensor file: unsupported version " + std::to_string(version));
  }
  StoredTensor out;
  out.dtype = parse_dtype(bytes[8]);
  const std::size_t rank = bytes[9];
  if (rank == 0) throw FormatError("tensor file: rank 0 is not allowed");
  if (rank > kMaxRank) throw FormatError("tensor file: rank " + std::to_string(rank) + " is not supported");
  std::size_t pos = 10;
  if (bytes.size() < pos + 4 * rank) throw ChecksumError("tensor file: truncated dims");
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, pos += 4) {
    dims[i] = get_u32(bytes.data() + pos);
    if (dims[i] == 0) throw FormatError("tensor file: zero extent");
    count *= dims[i];
  }
  const std::size_t width = dtype_size(out.dtype);
  const std::size_t expected = pos + count * width + 4;
  if (bytes.size() < expected) throw ChecksumError("tensor file: truncated payload");
  if (bytes.size() > expected) throw FormatError("tensor file: trailing bytes after checksum");
  const auto payload = bytes.subspan(pos, count * width);
  if (crc32_of(payload) != get_u32(bytes.data() + pos + payload.size())) {
    throw ChecksumError("tensor file: checksum mismatch");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = payload.data() + i * width;
    values[i] = out.dtype == DType::kFloat32 ? static_cast<double>(std::bit_cast<float>(get_u32(p)))
                                             : std::bit_cast<double>(get_u64(p));
  }
  out.tensor = Tensor(std::move(dims), std::move(values));
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, DType dtype) {
  write_bytes(path, encode_tensor(tensor, dtype));
}

StoredTensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_bytes(path));
  } catch (const TensorFileError& e) {
    // Re-throw the same kind with the path attached.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const BadMagicError*>(&e)) throw BadMagicError(msg);
    if (dynamic_cast<const BadVersionError*>(&e)) throw BadVersionError(msg);
    if (dynamic_cast<const ChecksumError*>(&e)) throw ChecksumError(msg);
    throw FormatError(msg);
  }
}

std::string encode_pgm(const Tensor& map) {
  if (map.rank() != 2) throw std::invalid_argument("pgm export needs an H x W map");
  std::string out = "P5\n" + std::to_string(map.dim(1)) + " " + std::to_string(map.dim(0)) + "\n255\n";
  out.reserve(out.size() + map.size());
  for (double v : map.data()) {
    const double scaled = std::floor(255.0 * v + 0.5);
    const double byte = std::isnan(scaled) ? 0.0 : std::clamp(scaled, 0.0, 255.0);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(byte)));
  }
  return out;
}

void export_pgm(const Tensor& map, const std::filesystem::path& path) {
  const std::string bytes = encode_pgm(map);
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

}  // namespace lens::io

// Copyright 2026 The tailknn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fmt/format.h>

#include "tailknn/baselm.hpp"
#include "tailknn/binary_io.hpp"

namespace tailknn::baselm {

void write_key_file(const std::string& path, std::uint32_t dim, std::span<const float> keys,
                    std::span<const TokenId> values) {
  if (dim == 0 || keys.size() != values.size() * dim) {
    throw std::invalid_argument(fmt::format("write_key_file: {} key floats do not match {} values of dim {}",
                                            keys.size(), values.size(), dim));
  }
  io::BinaryWriter out(path);
  out.magic(kKeyFileMagic);
  out.u32(dim);
  out.u64(values.size());
  out.f32s(keys);
  out.u32s(values);
  out.close();
}

EmbeddingReader::EmbeddingReader(const std::string& path, std::uint32_t expected_dim) : path_(path) {
  io::BinaryReader header(path);
  header.expect_magic(kKeyFileMagic);
  dim_ = header.u32();
  count_ = header.u64();
  if (dim_ == 0) throw DataError(fmt::format("'{}': key dimension is 0", path));
  if (expected_dim != 0 && dim_ != expected_dim) {
    throw DataError(fmt::format("'{}': key dimension {} does not match the expected {}", path, dim_, expected_dim));
  }
  const std::uint64_t record_bytes = std::uint64_t{dim_} * sizeof(float) + sizeof(TokenId);
  const std::uint64_t have = header.size() - kKeyFileHeaderBytes;
  if (have / record_bytes < count_) {
    // Keys come first, so the first record missing its value or key pins the
    // truncation point.
    const std::uint64_t key_bytes = std::uint64_t{dim_} * sizeof(float);
    const std::uint64_t complete_keys = std::min<std::uint64_t>(have / key_bytes, count_);
    const std::uint64_t value_space = have > count_ * key_bytes ? (have - count_ * key_bytes) / sizeof(TokenId) : 0;
    const std::uint64_t first_bad = std::min(complete_keys, value_space);
    throw DataError(fmt::format("'{}': truncated at byte {}; header declares {} records of dim {} but record {} is incomplete",
                                path, header.size(), count_, dim_, first_bad));
  }
  if (have != count_ * record_bytes) {
    throw DataError(fmt::format("'{}': {} trailing bytes after {} records", path, have - count_ * record_bytes, count_));
  }
  keys_.open(path, std::ios::binary);
  values_.open(path, std::ios::binary);
  keys_.seekg(static_cast<std::streamoff>(kKeyFileHeaderBytes));
  values_.seekg(static_cast<std::streamoff>(kKeyFileHeaderBytes + count_ * std::uint64_t{dim_} * sizeof(float)));
  if (!keys_ || !values_) throw DataError(fmt::format("'{}': cannot reopen for streaming", path));
}

bool EmbeddingReader::next(EmbeddingRecord& record) {
  if (cursor_ == count_) return false;
  record.key.resize(dim_);
  keys_.read(reinterpret_cast<char*>(record.key.data()), static_cast<std::streamsize>(dim_ * sizeof(float)));
  values_.read(reinterpret_cast<char*>(&record.target), sizeof(TokenId));
  if (!keys_ || !values_) throw DataError(fmt::format("'{}': read error at record {}", path_, cursor_));
  record.position = cursor_++;
  return true;
}

}  // namespace tailknn::baselm

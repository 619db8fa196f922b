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

#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

namespace tailknn::io {

/// Little-endian binary writer over an std::ofstream.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void magic(std::string_view tag);
  void u8s(std::span<const std::uint8_t> v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void u32s(std::span<const std::uint32_t> v);
  void f32s(std::span<const float> v);
  void close();

 private:
  void raw(const void* data, std::size_t bytes);

  std::string path_;
  std::ofstream out_;
};

/// Little-endian binary reader. Every failure throws DataError naming the file
/// and the byte offset where reading stopped.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  void u8s(std::span<std::uint8_t> out);
  void u32s(std::span<std::uint32_t> out);
  void f32s(std::span<float> out);
  std::uint64_t offset() const { return offset_; }
  std::uint64_t size() const { return size_; }
  bool at_end() const { return offset_ == size_; }
  void expect_end();

  /// Throws unless at least `bytes` remain; lets callers reject absurd
  /// headers before allocating.
  void require(std::uint64_t bytes, std::string_view what) const;

 private:
  void raw(void* data, std::size_t bytes, std::string_view what);

  std::string path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
  std::uint64_t size_ = 0;
};

}  // namespace tailknn::io

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
#include "tailknn/binary_io.hpp"

#include <bit>

#include <fmt/format.h>

#include "tailknn/common.hpp"

namespace tailknn::io {

// All on-disk formats are little-endian; raw copies are only valid on
// little-endian hosts.
static_assert(std::endian::native == std::endian::little);

BinaryWriter::BinaryWriter(const std::string& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
}

void BinaryWriter::raw(const void* data, std::size_t bytes) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out_) throw std::runtime_error(fmt::format("write failed on '{}'", path_));
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }
void BinaryWriter::u8s(std::span<const std::uint8_t> v) { raw(v.data(), v.size()); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::u32s(std::span<const std::uint32_t> v) { raw(v.data(), v.size_bytes()); }
void BinaryWriter::f32s(std::span<const float> v) { raw(v.data(), v.size_bytes()); }

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error(fmt::format("closing '{}' failed", path_));
}

BinaryReader::BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DataError(fmt::format("cannot open '{}'", path));
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0, std::ios::beg);
}

void BinaryReader::require(std::uint64_t bytes, std::string_view what) const {
  if (size_ - offset_ < bytes) {
    throw DataError(fmt::format("'{}': truncated at byte {} while reading {} ({} bytes needed, {} left)",
                                path_, offset_, what, bytes, size_ - offset_));
  }
}

void BinaryReader::raw(void* data, std::size_t bytes, std::string_view what) {
  require(bytes, what);
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in_) throw DataError(fmt::format("'{}': read error at byte {}", path_, offset_));
  offset_ += bytes;
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  if (size_ - offset_ < tag.size()) {
    throw DataError(fmt::format("'{}': file too short for magic \"{}\"", path_, tag));
  }
  raw(got.data(), got.size(), "magic");
  if (got != tag) {
    throw DataError(fmt::format("'{}': bad magic at byte 0, expected \"{}\"", path_, tag));
  }
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v, "u32");
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v, "u64");
  return v;
}

void BinaryReader::u8s(std::span<std::uint8_t> out) { raw(out.data(), out.size(), "byte array"); }
void BinaryReader::u32s(std::span<std::uint32_t> out) { raw(out.data(), out.size_bytes(), "u32 array"); }
void BinaryReader::f32s(std::span<float> out) { raw(out.data(), out.size_bytes(), "f32 array"); }

void BinaryReader::expect_end() {
  if (!at_end()) {
    throw DataError(fmt::format("'{}': {} trailing bytes after byte {}", path_, size_ - offset_, offset_));
  }
}

}  // namespace tailknn::io

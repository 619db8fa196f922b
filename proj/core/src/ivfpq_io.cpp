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

#include "tailknn/binary_io.hpp"
#include "tailknn/vindex.hpp"

namespace tailknn::vindex {
namespace {
constexpr std::string_view kIndexMagic = "TLIVFPQ1";
}

void IvfPqIndex::save(const std::string& path) const {
  io::BinaryWriter out(path);
  out.magic(kIndexMagic);
  out.u32(static_cast<std::uint32_t>(dim_));
  out.u32(static_cast<std::uint32_t>(lists_.size()));
  out.u32(static_cast<std::uint32_t>(pq_.m()));
  out.u32(static_cast<std::uint32_t>(pq_.nbits()));
  out.u64(size());
  out.f32s(coarse_);
  out.f32s(pq_.centroids());
  const std::size_t m = pq_.m();
  for (const auto& list : lists_) {
    out.u64(list.ids.size());
    for (std::size_t e = 0; e < list.ids.size(); ++e) {
      out.u32(list.ids[e]);
      out.u8s(std::span<const std::uint8_t>(list.codes).subspan(e * m, m));
      out.u32(list.values[e]);
    }
  }
  out.close();
}

IvfPqIndex IvfPqIndex::load(const std::string& path) {
  io::BinaryReader in(path);
  in.expect_magic(kIndexMagic);
  const std::uint32_t dim = in.u32();
  const std::uint32_t nlist = in.u32();
  const std::uint32_t m = in.u32();
  const std::uint32_t nbits = in.u32();
  const std::uint64_t n = in.u64();
  if (dim == 0 || nlist == 0 || m == 0 || dim % m != 0 || nbits < 1 || nbits > 8) {
    throw DataError(fmt::format("'{}': invalid header (D={}, C={}, M={}, nbits={})", path, dim, nlist, m, nbits));
  }
  const std::uint64_t ksub = std::uint64_t{1} << nbits;
  IvfPqIndex index;
  index.dim_ = dim;
  in.require(std::uint64_t{nlist} * dim * sizeof(float), "coarse centroids");
  index.coarse_.resize(std::size_t{nlist} * dim);
  in.f32s(index.coarse_);
  std::vector<float> codebook(m * ksub * (dim / m));
  in.require(codebook.size() * sizeof(float), "PQ codebook");
  in.f32s(codebook);
  index.pq_ = PqCodebook(dim, m, nbits, std::move(codebook));
  index.coarse_index_ = FlatIndex(dim, index.coarse_);

  index.lists_.resize(nlist);
  std::uint64_t stored = 0;
  for (auto& list : index.lists_) {
    const std::uint64_t len = in.u64();
    in.require(len * (8 + m), "inverted list");
    list.ids.resize(len);
    list.codes.resize(len * m);
    list.values.resize(len);
    for (std::uint64_t e = 0; e < len; ++e) {
      list.ids[e] = in.u32();
      in.u8s(std::span<std::uint8_t>(list.codes).subspan(e * m, m));
      list.values[e] = in.u32();
    }
    stored += len;
  }
  in.expect_end();
  if (stored != n) throw DataError(fmt::format("'{}': header declares {} entries, lists hold {}", path, n, stored));
  index.index_locations();
  return index;
}

}  // namespace tailknn::vindex

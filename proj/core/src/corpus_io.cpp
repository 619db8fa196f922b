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
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tailknn/binary_io.hpp"
#include "tailknn/corpus.hpp"

namespace tailknn::corpus {
namespace {

constexpr std::string_view kCorpusMagic = "TLCORP1";

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

std::uint64_t parse_u64(std::string_view field, const std::string& path, std::size_t line_no) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError(fmt::format("{}:{}: expected an unsigned integer, got '{}'", path, line_no, field));
  }
  return v;
}

}  // namespace

std::vector<std::string> read_text_documents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  std::vector<std::string> docs;
  std::string current;
  bool open = false;
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) {
      if (open) docs.push_back(std::move(current));
      current.clear();
      open = false;
      continue;
    }
    if (open) current += '\n';
    current += line;
    open = true;
  }
  if (open) docs.push_back(std::move(current));
  return docs;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  io::BinaryWriter out(path);
  out.magic(kCorpusMagic);
  out.u32(corpus.vocab_size);
  out.u64(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    out.u64(doc.size());
    out.u32s(doc);
  }
  out.close();
}

Corpus read_corpus(const std::string& path) {
  io::BinaryReader in(path);
  in.expect_magic(kCorpusMagic);
  Corpus corpus;
  corpus.vocab_size = in.u32();
  const std::uint64_t n_docs = in.u64();
  in.require(n_docs * sizeof(std::uint64_t), "document headers");
  corpus.docs.resize(n_docs);
  for (auto& doc : corpus.docs) {
    const std::uint64_t len = in.u64();
    in.require(len * sizeof(TokenId), "document tokens");
    doc.resize(len);
    in.u32s(doc);
  }
  in.expect_end();
  corpus.validate();
  return corpus;
}

void write_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
  for (const auto& tok : vocab.entries()) out << tok << '\n';
  if (!out) throw std::runtime_error(fmt::format("write failed on '{}'", path));
}

Vocabulary read_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (line_no == 0) {
      if (line != Vocabulary::kUnkToken) {
        throw DataError(fmt::format("{}:1: first entry must be '{}'", path, Vocabulary::kUnkToken));
      }
    } else if (vocab.add(line) != line_no) {
      throw DataError(fmt::format("{}:{}: duplicate token '{}'", path, line_no + 1, line));
    }
    ++line_no;
  }
  return vocab;
}

void write_frequency_tsv(const std::string& path, const FrequencyTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
  out << "#total=" << table.total() << '\n';
  const auto counts = table.counts();
  for (std::size_t id = 0; id < counts.size(); ++id) {
    if (counts[id] != 0) out << id << '\t' << counts[id] << '\n';
  }
  if (!out) throw std::runtime_error(fmt::format("write failed on '{}'", path));
}

FrequencyTable read_frequency_tsv(const std::string& path, FrequencySource source, std::size_t min_domain) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("#total=")) {
    throw DataError(fmt::format("{}:1: expected '#total=<N>' header", path));
  }
  const std::uint64_t declared = parse_u64(std::string_view(line).substr(7), path, 1);
  FrequencyTable table(source, min_domain);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(fmt::format("{}:{}: expected two tab-separated fields", path, line_no));
    const std::string_view view(line);
    const auto id = parse_u64(view.substr(0, tab), path, line_no);
    const auto count = parse_u64(view.substr(tab + 1), path, line_no);
    if (id > UINT32_MAX) throw DataError(fmt::format("{}:{}: token id {} too large", path, line_no, id));
    table.add(static_cast<TokenId>(id), count);
  }
  if (table.total() != declared) {
    throw DataError(fmt::format("{}: header total {} does not match the sum of counts {}", path, declared,
                                table.total()));
  }
  return table;
}

}  // namespace tailknn::corpus

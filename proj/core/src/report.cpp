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
#include <iterator>

#include <fmt/format.h>

#include "tailknn/diagnostics.hpp"

namespace tailknn::diagnostics {

namespace {

constexpr std::string_view kReportHeader =
    "bin_lo,bin_hi,n_obs,mean_p_knn,mean_p_lm,hit_rate,mean_cv,contamination,mean_pq_error";

void put(fmt::memory_buffer& buf, const std::optional<double>& v) {
  buf.push_back(',');
  if (v) fmt::format_to(std::back_inserter(buf), "{:.17g}", *v);
}

void write_file(const std::string& path, const fmt::memory_buffer& buf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open {} for writing", path));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(fmt::format("write to {} failed", path));
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) return out;
    line.remove_prefix(comma + 1);
  }
}

template <typename T>
T parse(std::string_view field, const std::string& path, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(fmt::format("{}:{}: cannot parse field '{}'", path, line, field));
  }
  return value;
}

std::optional<double> parse_optional(std::string_view field, const std::string& path, std::size_t line) {
  if (field.empty()) return std::nullopt;
  return parse<double>(field, path, line);
}

}  // namespace

void emit_report(const DiagnosticsReport& report, const std::string& path) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{}\n", kReportHeader);
  for (const auto& r : report.rows) {
    fmt::format_to(std::back_inserter(buf), "{},{},{}", r.bin_lo, r.bin_hi, r.n_obs);
    put(buf, r.mean_p_knn);
    put(buf, r.mean_p_lm);
    put(buf, r.hit_rate);
    put(buf, r.mean_cv);
    put(buf, r.contamination);
    put(buf, r.mean_pq_error);
    buf.push_back('\n');
  }
  write_file(path, buf);
}

DiagnosticsReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw DataError(fmt::format("{}: not a diagnostics report (unexpected header)", path));
  }
  DiagnosticsReport report;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 9) throw DataError(fmt::format("{}:{}: expected 9 fields, found {}", path, lineno, f.size()));
    BinRow r;
    r.bin_lo = parse<std::uint64_t>(f[0], path, lineno);
    r.bin_hi = parse<std::uint64_t>(f[1], path, lineno);
    r.n_obs = parse<std::uint64_t>(f[2], path, lineno);
    r.mean_p_knn = parse_optional(f[3], path, lineno);
    r.mean_p_lm = parse_optional(f[4], path, lineno);
    r.hit_rate = parse_optional(f[5], path, lineno);
    r.mean_cv = parse_optional(f[6], path, lineno);
    r.contamination = parse_optional(f[7], path, lineno);
    r.mean_pq_error = parse_optional(f[8], path, lineno);
    report.rows.push_back(r);
  }
  return report;
}

void emit_type_table(const GainErrorResult& gains, const corpus::FrequencyTable& freq, const std::string& path) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "token_id,freq,mean_gain,mean_pq_error\n");
  for (std::size_t i = 0; i < gains.tokens.size(); ++i) {
    fmt::format_to(std::back_inserter(buf), "{},{},{:.17g},{:.17g}\n", gains.tokens[i], freq.count(gains.tokens[i]),
                   gains.mean_gain[i], gains.mean_error[i]);
  }
  write_file(path, buf);
}

void emit_tertiles(std::span<const TertileRow> rows, const std::string& path) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "category,n_obs,mean_p_knn,mean_p_lm\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(buf), "{},{}", tertile_name(r.category), r.n_obs);
    put(buf, r.mean_p_knn);
    put(buf, r.mean_p_lm);
    buf.push_back('\n');
  }
  write_file(path, buf);
}

void emit_sweep(std::span<const SweepRow> rows, const std::string& path) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "k,tau,category,n_obs,mean_p_knn,mean_p_lm\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{}", r.k, r.temperature, tertile_name(r.row.category),
                   r.row.n_obs);
    put(buf, r.row.mean_p_knn);
    put(buf, r.row.mean_p_lm);
    buf.push_back('\n');
  }
  write_file(path, buf);
}

}  // namespace tailknn::diagnostics

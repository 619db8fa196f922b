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
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "tailknn/config.hpp"

namespace tailknn::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  return v;
}

std::string parse_string(const std::string& key, const std::string& text) {
  if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
    throw ConfigError(fmt::format("{}: expected a double-quoted string, got '{}'", key, text));
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (i + 2 >= text.size()) throw ConfigError(fmt::format("{}: dangling escape", key));
      c = text[++i];
      if (c != '\\' && c != '"') throw ConfigError(fmt::format("{}: unsupported escape '\\{}'", key, c));
    } else if (c == '"') {
      throw ConfigError(fmt::format("{}: unescaped quote inside string", key));
    }
    out.push_back(c);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw ConfigError(fmt::format("{}: expected a [a, b, ...] list, got '{}'", key, text));
  }
  std::vector<T> out;
  std::stringstream items(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(fmt::format("{}: empty list element", key));
    out.push_back(parse_number<T>(key, item));
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

template <typename T>
std::string list_text(const std::vector<T>& v) {
  return fmt::format("[{}]", fmt::join(v, ", "));
}

struct Field {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

// Shorthands for the field table below.
#define TK_UINT(name, member, type)                                                          \
  Field {                                                                                    \
    name, [](PipelineConfig& c, const std::string& v) { c.member = parse_number<type>(name, v); }, \
        [](const PipelineConfig& c) { return fmt::format("{}", c.member); }                  \
  }
#define TK_REAL(name, member)                                                                  \
  Field {                                                                                      \
    name, [](PipelineConfig& c, const std::string& v) { c.member = parse_number<double>(name, v); }, \
        [](const PipelineConfig& c) { return fmt::format("{}", c.member); }                    \
  }
#define TK_STR(name, member)                                                             \
  Field {                                                                                \
    name, [](PipelineConfig& c, const std::string& v) { c.member = parse_string(name, v); }, \
        [](const PipelineConfig& c) { return quote(c.member); }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TK_UINT("seed", seed, std::uint64_t),
      TK_STR("paths.corpus", corpus),
      TK_STR("paths.out_dir", out_dir),
      TK_STR("paths.pretrain_freq", pretrain_freq),
      TK_STR("paths.keys_import", keys_import),
      TK_UINT("resplit.target_eval_tokens", target_eval_tokens, std::uint64_t),
      TK_UINT("resplit.min_count", min_count, std::uint64_t),
      TK_UINT("encoder.dim", encoder.dim, std::uint32_t),
      TK_UINT("encoder.window", encoder.window, std::uint32_t),
      TK_REAL("encoder.decay", encoder.decay),
      TK_UINT("encoder.seed", encoder.seed, std::uint64_t),
      TK_UINT("lm.order", lm_order, int),
      Field{"index.kind",
            [](PipelineConfig& c, const std::string& v) {
              const auto s = parse_string("index.kind", v);
              if (s == "ivfpq") {
                c.index_kind = IndexKind::kIvfPq;
              } else if (s == "flat") {
                c.index_kind = IndexKind::kFlat;
              } else {
                throw ConfigError(fmt::format("index.kind: expected \"ivfpq\" or \"flat\", got \"{}\"", s));
              }
            },
            [](const PipelineConfig& c) { return quote(c.index_kind == IndexKind::kFlat ? "flat" : "ivfpq"); }},
      TK_UINT("index.centroids", ivfpq.centroids, std::uint32_t),
      TK_UINT("index.code_size", ivfpq.code_size, std::uint32_t),
      TK_UINT("index.nbits", ivfpq.nbits, std::uint32_t),
      TK_UINT("index.train_sample", ivfpq.train_sample, std::uint64_t),
      TK_UINT("index.kmeans_iters", ivfpq.kmeans_iters, std::uint32_t),
      TK_UINT("knn.k", knn.k, std::size_t),
      TK_REAL("knn.temperature", knn.temperature),
      TK_REAL("knn.lambda", knn.lambda),
      TK_UINT("knn.nprobe", knn.nprobe, std::size_t),
      Field{"knn.exact_rescore",
            [](PipelineConfig& c, const std::string& v) { c.knn.exact_rescore = parse_bool("knn.exact_rescore", v); },
            [](const PipelineConfig& c) { return std::string(c.knn.exact_rescore ? "true" : "false"); }},
      TK_UINT("diagnostics.bins_per_decade", bins_per_decade, unsigned),
      TK_UINT("diagnostics.contamination_per_type", contamination_per_type, std::uint64_t),
      Field{"sweep.k_list",
            [](PipelineConfig& c, const std::string& v) { c.sweep_k = parse_list<std::uint64_t>("sweep.k_list", v); },
            [](const PipelineConfig& c) { return list_text(c.sweep_k); }},
      Field{"sweep.tau_list",
            [](PipelineConfig& c, const std::string& v) { c.sweep_tau = parse_list<double>("sweep.tau_list", v); },
            [](const PipelineConfig& c) { return list_text(c.sweep_tau); }},
      TK_UINT("synth.vocab_size", synth.vocab_size, std::uint32_t),
      TK_REAL("synth.alpha", synth.alpha),
      TK_UINT("synth.tokens", synth.tokens, std::uint64_t),
      TK_UINT("synth.mean_doc_len", synth.mean_doc_len, std::uint32_t),
      TK_REAL("synth.successor_weight", synth.successor_weight),
      TK_UINT("synth.successors", synth.successors, std::uint32_t),
      TK_UINT("synth.content_rank", synth.content_rank, std::uint32_t),
      TK_REAL("synth.trigger_weight", synth.trigger_weight),
      TK_UINT("synth.triggers", synth.triggers, std::uint32_t),
      TK_UINT("synth.trigger_len", synth.trigger_len, std::uint32_t),
      TK_UINT("synth.trigger_rank", synth.trigger_rank, std::uint32_t),
      TK_REAL("synth.pair_weight", synth.pair_weight),
  };
  return table;
}

#undef TK_UINT
#undef TK_REAL
#undef TK_STR

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

void PipelineConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("paths.out_dir must not be empty");
  if (lm_order < 1 || lm_order > 5) throw ConfigError(fmt::format("lm.order {} outside [1, 5]", lm_order));
  if (encoder.dim == 0 || encoder.window == 0) throw ConfigError("encoder.dim and encoder.window must be >= 1");
  if (!(encoder.decay > 0.0 && encoder.decay < 1.0)) {
    throw ConfigError(fmt::format("encoder.decay {} outside (0, 1)", encoder.decay));
  }
  if (index_kind == IndexKind::kIvfPq) {
    if (ivfpq.centroids == 0) throw ConfigError("index.centroids must be >= 1");
    if (ivfpq.code_size == 0 || encoder.dim % ivfpq.code_size != 0) {
      throw ConfigError(fmt::format("index.code_size {} must divide encoder.dim {}", ivfpq.code_size, encoder.dim));
    }
    if (ivfpq.nbits < 1 || ivfpq.nbits > 8) throw ConfigError("index.nbits must be in [1, 8]");
  }
  try {
    knn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (bins_per_decade == 0) throw ConfigError("diagnostics.bins_per_decade must be >= 1");
  if (sweep_k.empty() || sweep_tau.empty()) throw ConfigError("sweep lists must not be empty");
  for (auto k : sweep_k) {
    if (k == 0) throw ConfigError("sweep.k_list entries must be >= 1");
  }
  for (double t : sweep_tau) {
    if (!(t > 0.0)) throw ConfigError("sweep.tau_list entries must be > 0");
  }
}

std::string PipelineConfig::to_text() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec != section) {
      out += fmt::format("\n[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", dot == std::string::npos ? key : key.substr(dot + 1), f.get(*this));
  }
  return out;
}

PipelineConfig PipelineConfig::parse(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
    // Comments start at a '#' outside quotes.
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\')) quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const std::string line = trim(std::string_view(raw).substr(0, cut));
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        if (section.empty()) throw ConfigError("empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("expected 'key = value', got '{}'", line));
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) throw ConfigError("missing key before '='");
      cfg.set(section.empty() ? key : section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, lineno, e.what()));
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

}  // namespace tailknn::config

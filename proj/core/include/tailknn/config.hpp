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
#include <stdexcept>
#include <string>
#include <vector>

#include "tailknn/baselm.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/synth.hpp"
#include "tailknn/vindex.hpp"

namespace tailknn::config {

/// Malformed configuration text, unknown key or out-of-range value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class IndexKind { kIvfPq, kFlat };

struct PipelineConfig {
  std::uint64_t seed = 0;

  // [paths]
  std::string corpus;         // UTF-8 text, one document per blank-line block
  std::string out_dir = "out";
  std::string pretrain_freq;  // optional token_id<TAB>count table
  std::string keys_import;    // optional externally produced key file

  // [resplit]
  std::uint64_t target_eval_tokens = 40000;
  std::uint64_t min_count = 1;

  baselm::EncoderParams encoder;  // [encoder]
  int lm_order = 3;               // [lm]

  // [index]
  IndexKind index_kind = IndexKind::kIvfPq;
  vindex::IvfPqConfig ivfpq;  // seed comes from the global seed

  knnlm::KnnConfig knn;  // [knn]

  // [diagnostics]
  unsigned bins_per_decade = 8;
  std::uint64_t contamination_per_type = 32;  // 0 checks every entry

  // [sweep]
  std::vector<std::uint64_t> sweep_k = {1, 4, 16, 64};
  std::vector<double> sweep_tau = {1.0, 10.0};

  synth::ZipfCorpusParams synth;  // [synth]; seed comes from the global seed

  /// Applies one `section.key = value` assignment (the key of a top-level
  /// entry has no section). Throws ConfigError on unknown keys or values
  /// that do not parse.
  void set(const std::string& key, const std::string& value);

  /// Range checks that need the whole configuration.
  void validate() const;

  /// Every key, in a fixed order, in the file syntax parse() accepts.
  std::string to_text() const;

  static PipelineConfig parse(const std::string& text, const std::string& origin = "<config>");
  static PipelineConfig load(const std::string& path);
};

}  // namespace tailknn::config

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

#include <string>
#include <string_view>

#include "tailknn/config.hpp"

namespace tailknn::pipeline {

/// Path of an artifact inside the configured output directory.
std::string artifact(const config::PipelineConfig& cfg, std::string_view name);

/// Each command reads its inputs from the output directory (or the
/// configured paths), writes its outputs there together with
/// `<command>.config.toml`, and prints a short summary to stdout. Data
/// problems raise DataError; bad parameters raise ConfigError or
/// std::invalid_argument.

/// Synthetic Zipf text corpus at paths.corpus (tokens spelled t<rank>).
void cmd_synth(const config::PipelineConfig& cfg);
/// vocab.txt, train/valid/test.bin, split_stats.csv, rare_histogram.csv.
void cmd_resplit(const config::PipelineConfig& cfg);
/// datastore.bin and, for the ivfpq index kind, index.bin.
void cmd_build(const config::PipelineConfig& cfg);
/// eval_summary.csv and records.csv for the test split.
void cmd_eval(const config::PipelineConfig& cfg);
/// Frequency-stratified reports from records.csv and the built artifacts.
void cmd_diagnose(const config::PipelineConfig& cfg);
/// sweep.csv over sweep.k_list x sweep.tau_list.
void cmd_sweep(const config::PipelineConfig& cfg);

}  // namespace tailknn::pipeline

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

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tailknn/common.hpp"
#include "tailknn/config.hpp"
#include "tailknn/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value
};

tailknn::config::PipelineConfig resolve(const Options& opt) {
  auto cfg = opt.config_path.empty() ? tailknn::config::PipelineConfig{}
                                     : tailknn::config::PipelineConfig::load(opt.config_path);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw tailknn::config::ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailknn: kNN-LM evaluation with frequency-stratified diagnostics"};
  app.require_subcommand(1);

  Options opt;
  using Command = std::function<void(const tailknn::config::PipelineConfig&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"synth", {"Write a synthetic Zipf text corpus to paths.corpus", tailknn::pipeline::cmd_synth}},
      {"resplit", {"Tokenize paths.corpus and split it by rare n-gram ratio", tailknn::pipeline::cmd_resplit}},
      {"build", {"Build the datastore and index from the train split", tailknn::pipeline::cmd_build}},
      {"eval", {"Score the test split with the base LM and kNN-LM", tailknn::pipeline::cmd_eval}},
      {"diagnose", {"Write frequency-stratified reports from the eval records", tailknn::pipeline::cmd_diagnose}},
      {"sweep", {"Mean probabilities per tertile over a (k, tau) grid", tailknn::pipeline::cmd_sweep}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", opt.config_path, "TOML-style configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Override the global seed");
    sub->add_option("--out-dir", opt.out_dir, "Override paths.out_dir");
    sub->add_option("--set", opt.overrides, "Override one key, e.g. --set knn.k=64")->allow_extra_args(false);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto* chosen = app.get_subcommands().front();
  try {
    const auto cfg = resolve(opt);
    commands.at(chosen->get_name()).second(cfg);
  } catch (const tailknn::config::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitUsage;
  } catch (const tailknn::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "invalid parameter: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitData;
  }
  return kExitOk;
}

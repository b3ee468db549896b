/*
 * Copyright (c) 2026 The sacon Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sacon/corpus.hpp"
#include "sacon/encoder.hpp"
#include "sacon/episodes.hpp"
#include "sacon/training.hpp"

namespace sacon {

struct EvalConfig {
  std::filesystem::path corpus;  // held-out relations
  TaskSpec task;
  std::uint64_t seed = 7;
  bool label_info = false;
  Similarity similarity = Similarity::Cosine;
};

/// Everything `pretrain` and the evaluators need. Top-level keys: corpus,
/// labels, background (optional), vocab, encoder, train, preprocess, eval.
/// Unknown keys anywhere are rejected; relative paths resolve against the
/// directory holding the config file.
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path labels;
  std::filesystem::path background;  // empty: no MLM warm-up
  std::size_t vocab_min_count = 1;
  EncoderConfig encoder;  // vocab_size is filled in from the built vocabulary
  TrainConfig train;
  PreprocessConfig preprocess;
  EvalConfig eval;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

/// Default config as pretty JSON, for --help.
std::string default_config_text();

std::string_view to_string(Similarity s);
Similarity similarity_from_string(std::string_view s);

}  // namespace sacon

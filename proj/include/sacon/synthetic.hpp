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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/corpus.hpp"

namespace sacon {

struct SynthSpec {
  int n_relations = 20;
  int instances_per_relation = 50;
  int vocab_size = 2000;
  int relation_signal = 3;  // signal tokens per relation, all present in each sentence
  int noise_tokens = 5;
  int heldout_relations = 6;
  // Extra unlabeled-use sentences per relation for MLM warm-up; drawn from a
  // separate stream, so the main corpus does not depend on it.
  int background_per_relation = 50;
  std::uint64_t rng_seed = 0;

  // Throws DataError when the vocabulary cannot hold disjoint signal sets
  // plus a filler pool.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthCorpus {
  std::vector<RawSentence> sentences;
  std::vector<RawSentence> background;
  std::vector<RawLabelRecord> labels;
  std::vector<std::vector<std::string>> signal_sets;  // per relation
  std::vector<std::string> pretrain_relations;
  std::vector<std::string> heldout_relations;

  std::vector<RawSentence> sentences_of(const std::vector<std::string>& relation_ids) const;
};

/// Each relation owns `relation_signal` tokens nobody else uses. A sentence is
/// a shuffle of its head entity, tail entity (1-2 filler tokens each), the
/// relation's signal tokens and `noise_tokens` fillers. Label names and
/// descriptions are built from the signal tokens.
SynthCorpus generate(const SynthSpec& spec);

/// corpus.jsonl (all), pretrain.jsonl, heldout.jsonl, background.jsonl,
/// labels.json.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace sacon

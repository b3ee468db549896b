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
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "sacon/config.hpp"
#include "sacon/episodes.hpp"
#include "sacon/metrics.hpp"
#include "sacon/training.hpp"

namespace sacon {

/// Files of a run, read once. The vocabulary covers the pretraining,
/// background and evaluation corpora plus every label, so evaluation
/// sentences never fall back to UNK.
struct RunData {
  LabelDictionary labels;
  std::vector<RawSentence> corpus;
  std::vector<RawSentence> background;
  std::vector<RawSentence> eval_corpus;
  Vocab vocab;

  static RunData load(const RunConfig& cfg);
};

/// Trainer plus the data it points into. Not copyable or movable, since the
/// trainer keeps references to `data` and `background`.
class PretrainSession {
 public:
  PretrainSession(const RunConfig& cfg, const RunData& run);
  PretrainSession(const PretrainSession&) = delete;
  PretrainSession& operator=(const PretrainSession&) = delete;

  Trainer& trainer() { return *trainer_; }
  const PretrainingData& data() const { return data_; }
  const RunConfig& config() const { return cfg_; }

 private:
  RunConfig cfg_;
  PretrainingData data_;
  std::optional<PretrainingData> background_;
  std::optional<Trainer> trainer_;
};

/// Evaluation corpus resolved against a (possibly checkpoint-provided) vocab.
PretrainingData eval_data(const Vocab& vocab, const LabelDictionary& labels, const std::vector<RawSentence>& corpus,
                          std::size_t max_seq_len);

EvalReport evaluate_fewshot(const BiEncoder& model, const PretrainingData& eval, const TaskSpec& task,
                            std::uint64_t seed, bool label_info, Similarity sim = Similarity::Cosine);
/// K is forced to 0.
EvalReport evaluate_zeroshot(const BiEncoder& model, const PretrainingData& eval, TaskSpec task, std::uint64_t seed);

struct PretrainOutputs {
  std::filesystem::path checkpoint;
  std::vector<TrainLogRecord> log;
};

/// Runs the whole schedule, writing `log_path` (JSON lines, optional),
/// periodic checkpoint-<step>.bin files, checkpoint.bin and vocab.json under
/// `out_dir`. Progress lines go to `progress` when given.
PretrainOutputs run_pretraining(PretrainSession& session, const std::filesystem::path& out_dir,
                                const std::filesystem::path& log_path, std::ostream* progress,
                                const PretrainingData* eval = nullptr);

}  // namespace sacon

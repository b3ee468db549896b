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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sacon/checkpoint.hpp"
#include "sacon/corpus.hpp"
#include "sacon/encoder.hpp"
#include "sacon/losses.hpp"
#include "sacon/optim.hpp"

namespace sacon {

enum class SamplerKind { Uniform, ClassBalanced };

/// Warmup: masked language modelling only, over unlabeled background text.
/// Contrastive: the configured objective over the pretraining corpus.
enum class Phase { Warmup, Contrastive };
std::string_view to_string(Phase p);

struct TrainConfig {
  std::size_t batch_size = 32;
  int epochs = 30;
  int warmup_epochs = 20;  // ignored when the trainer has no background corpus
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t rng_seed = 0;
  ObjectiveMode objective_mode = ObjectiveMode::Full;
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::int64_t eval_every = 0;        // 0: no periodic evaluation
  std::int64_t max_steps = 0;         // 0: run all epochs
  SamplerKind sampler = SamplerKind::Uniform;
  bool normalize_label_positives = false;
  // Both towers start from the same weights, as two copies of one pretrained
  // encoder would. They are separate tensors either way.
  bool shared_init = true;

  void validate() const;
  nlohmann::json to_json() const;
  AdamWConfig adamw() const { return {lr, beta1, beta2, eps, weight_decay}; }
};

/// Label encoder, sentence encoder and the shared temperature.
struct BiEncoder {
  EncoderParams label_encoder;
  EncoderParams sentence_encoder;
  Temperature temperature;

  static BiEncoder init(const EncoderConfig& config, std::uint64_t seed, bool shared_init);
  // label_encoder.*, sentence_encoder.*, temperature
  std::vector<NamedTensor> named_parameters() const;
};

/// Corpus resolved against a vocabulary, with markers inserted once.
struct PretrainingData {
  Vocab vocab;
  LabelDictionary labels;
  std::vector<SentenceInstance> instances;
  std::vector<MarkedSequence> marked;
  std::unordered_map<std::string, std::vector<int>> label_tokens;

  static PretrainingData build(Vocab vocab, LabelDictionary labels, const std::vector<RawSentence>& sentences,
                               std::size_t max_seq_len);
};

struct PreparedSentence {
  std::vector<int> tokens;
  std::size_t pos_e1s = 0;
  std::size_t pos_e2s = 0;
  std::vector<MlmTarget> targets;
};

struct PreparedLabel {
  std::vector<int> tokens;
  std::vector<MlmTarget> targets;
};

struct Batch {
  Phase phase = Phase::Contrastive;
  std::int64_t epoch = 0;
  std::size_t index_in_epoch = 0;
  std::vector<std::size_t> sentence_ids;
  PairingIndex pairing;
  std::vector<PreparedSentence> sentences;
  std::vector<PreparedLabel> labels;  // one per pairing label row
};

/// Sentence ids of every batch of `epoch`. Each sentence appears exactly once.
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<SentenceInstance>& instances,
                                                    const TrainConfig& cfg, std::int64_t epoch,
                                                    Phase phase = Phase::Contrastive);

/// Blank + MLM masking for the batch's sentences and its distinct labels.
/// Randomness is indexed by (seed, epoch, sentence id) and (seed, epoch,
/// batch, label row), so a batch can be rebuilt independently.
Batch prepare_batch(const PretrainingData& data, const PreprocessConfig& pre, std::int64_t epoch,
                    std::size_t index_in_epoch, std::vector<std::size_t> sentence_ids,
                    Phase phase = Phase::Contrastive);

/// Prepared batches of one epoch, in schedule order.
std::vector<Batch> make_batches(const PretrainingData& data, const TrainConfig& cfg, const PreprocessConfig& pre,
                                std::int64_t epoch, Phase phase = Phase::Contrastive);

struct TrainLogRecord {
  Phase phase = Phase::Contrastive;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double scl_s = 0, scl_l = 0, scl = 0;
  double mlm_s = 0, mlm_l = 0, mlm = 0;
  double total = 0;
  double tau = 0;
  double wall_ms = 0;

  nlohmann::json to_json() const;
  // Everything except wall-clock time.
  bool same_values(const TrainLogRecord& other) const;
};

/// Forward + loss for one batch without touching parameters. Warmup batches
/// still report the contrastive terms, but `total` is the MLM loss alone.
struct StepLosses {
  Tensor scl_s, scl_l, mlm_s, mlm_l, total;
};
StepLosses compute_losses(const BiEncoder& model, const Batch& batch, const TrainConfig& cfg);

class Trainer {
 public:
  /// `background`, when given, is consumed first for `warmup_epochs` of
  /// MLM-only steps. With shared_init those steps train the sentence tower
  /// on sentences and label texts alike, and the label tower is overwritten
  /// with it once warm-up ends. The optimizer restarts at that boundary.
  /// Both corpora must outlive the trainer.
  Trainer(BiEncoder model, const PretrainingData& data, TrainConfig train, PreprocessConfig pre,
          const PretrainingData* background = nullptr);

  std::size_t steps_per_epoch() const;
  std::size_t warmup_steps_per_epoch() const;
  std::int64_t warmup_steps() const;
  std::int64_t total_steps() const;
  std::int64_t steps_taken() const { return step_; }
  bool done() const { return step_ >= total_steps(); }

  /// Runs the next scheduled batch.
  TrainLogRecord step();
  /// One optimizer step on an explicit batch.
  TrainLogRecord pretrain_step(const Batch& batch);

  Checkpoint to_checkpoint() const;
  /// Replaces model and optimizer state. Throws DataError naming the first
  /// tensor whose shape disagrees.
  void restore(const Checkpoint& ckpt);

  const BiEncoder& model() const { return model_; }
  BiEncoder& model() { return model_; }
  const TrainConfig& train_config() const { return train_; }
  const PreprocessConfig& preprocess_config() const { return pre_; }
  const OptimizerState& optimizer_state() const { return opt_; }

 private:
  void finish_warmup();

  BiEncoder model_;
  const PretrainingData* data_;
  const PretrainingData* background_;
  TrainConfig train_;
  PreprocessConfig pre_;
  std::vector<NamedTensor> params_;
  std::vector<bool> warmup_active_;
  OptimizerState opt_;
  std::int64_t step_ = 0;
  Phase cached_phase_ = Phase::Contrastive;
  std::int64_t cached_epoch_ = -1;
  std::vector<std::vector<std::size_t>> cached_plan_;
};

/// Model tensors plus the metadata needed to use them (vocab, encoder and
/// preprocessing config).
struct LoadedModel {
  BiEncoder model;
  Vocab vocab;
  PreprocessConfig preprocess;
};
LoadedModel load_model(const Checkpoint& ckpt);

}  // namespace sacon

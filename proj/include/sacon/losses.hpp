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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sacon/tensor.hpp"

namespace sacon {

/// Which sentence goes with which label row. Label rows are the distinct
/// relations of the batch in order of first appearance.
struct PairingIndex {
  std::vector<std::string> label_ids;                // m
  std::vector<std::size_t> pair_index;               // n, row of each sentence's label
  std::vector<std::vector<std::size_t>> positives;   // m, sentences carrying each label

  static PairingIndex from_relations(const std::vector<std::string>& sentence_relations);
  std::size_t n() const { return pair_index.size(); }
  std::size_t m() const { return label_ids.size(); }
  // Throws std::invalid_argument when the index is inconsistent.
  void validate() const;
};

struct BatchPairing {
  Tensor sentences;  // n x 2d
  Tensor labels;     // m x 2d
  PairingIndex index;
};

inline constexpr double kInitialTemperature = 0.07;
inline constexpr double kMinTemperature = 0.01;  // logits scaled by at most 100

/// Learnable softmax temperature shared by both contrastive directions.
struct Temperature {
  Tensor value = Tensor::parameter(Matrix::Constant(1, 1, kInitialTemperature));

  double get() const { return value.value()(0, 0); }
  void clamp() {
    auto& v = value.mutable_value()(0, 0);
    if (v < kMinTemperature) v = kMinTemperature;
  }
};

/// n x m cosine similarities between rows. Zero-norm rows are rejected with
/// a DataError naming the row.
Tensor cosine_similarity_matrix(const Tensor& sentences, const Tensor& labels);

/// Sentence-anchored InfoNCE: mean over sentences of -log softmax over the m
/// labels at the sentence's own label.
Tensor scl_sentence_loss(const Tensor& cosine, const PairingIndex& index, const Tensor& tau);
Tensor scl_sentence_loss(const BatchPairing& batch, const Tensor& tau);

/// Label-anchored InfoNCE: for each label, softmax over the n sentences, and
/// every positive sentence adds its -log probability; the total is divided by
/// m. With `normalize_positives` each label's sum is first divided by |A|.
Tensor scl_label_loss(const Tensor& cosine, const PairingIndex& index, const Tensor& tau,
                      bool normalize_positives = false);
Tensor scl_label_loss(const BatchPairing& batch, const Tensor& tau, bool normalize_positives = false);

Tensor scl_loss(const BatchPairing& batch, const Tensor& tau, bool normalize_positives = false);

/// Mean cross-entropy over the masked positions of each encoder, summed. A
/// side without masked positions contributes 0.
Tensor mlm_loss_pair(const Tensor& sentence_logits, const std::vector<int>& sentence_targets,
                     const Tensor& label_logits, const std::vector<int>& label_targets);

/// scl / 2 + mlm
Tensor total_loss(const Tensor& scl, const Tensor& mlm);

enum class ObjectiveMode { Full, SentenceAnchoredOnly, LabelAnchoredOnly, NoMlm };

std::string_view to_string(ObjectiveMode mode);
ObjectiveMode objective_mode_from_string(std::string_view name);

/// full: (scl_s + scl_l)/2 + mlm; sentence_anchored_only: scl_s/2 + mlm;
/// label_anchored_only: scl_l/2 + mlm; no_mlm: (scl_s + scl_l)/2.
Tensor objective(ObjectiveMode mode, const Tensor& scl_sentence, const Tensor& scl_label, const Tensor& mlm);

}  // namespace sacon

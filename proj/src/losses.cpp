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

#include "sacon/losses.hpp"

#include <stdexcept>
#include <unordered_map>

#include "sacon/errors.hpp"

namespace sacon {

PairingIndex PairingIndex::from_relations(const std::vector<std::string>& sentence_relations) {
  PairingIndex idx;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < sentence_relations.size(); ++i) {
    auto [it, inserted] = row_of.emplace(sentence_relations[i], idx.label_ids.size());
    if (inserted) {
      idx.label_ids.push_back(sentence_relations[i]);
      idx.positives.emplace_back();
    }
    idx.pair_index.push_back(it->second);
    idx.positives[it->second].push_back(i);
  }
  return idx;
}

void PairingIndex::validate() const {
  if (positives.size() != label_ids.size()) throw std::invalid_argument("pairing: positives/labels size mismatch");
  std::size_t total = 0;
  for (std::size_t r = 0; r < positives.size(); ++r) {
    if (positives[r].empty()) throw std::invalid_argument("pairing: label row " + std::to_string(r) + " has no positive");
    for (auto s : positives[r]) {
      if (s >= pair_index.size() || pair_index[s] != r) {
        throw std::invalid_argument("pairing: positive set of label row " + std::to_string(r) + " is inconsistent");
      }
    }
    total += positives[r].size();
  }
  if (total != pair_index.size()) throw std::invalid_argument("pairing: positive sets do not cover every sentence");
  for (auto p : pair_index) {
    if (p >= label_ids.size()) throw std::invalid_argument("pairing: pair index out of range");
  }
}

Tensor cosine_similarity_matrix(const Tensor& sentences, const Tensor& labels) {
  if (sentences.cols() != labels.cols()) {
    throw ShapeError("cosine_similarity_matrix: embedding widths differ, " + shape_str(sentences) + " vs " +
                     shape_str(labels));
  }
  return matmul(normalize_rows(sentences), transpose(normalize_rows(labels)));
}

Tensor scl_sentence_loss(const Tensor& cosine, const PairingIndex& index, const Tensor& tau) {
  if (static_cast<std::size_t>(cosine.rows()) != index.n() || static_cast<std::size_t>(cosine.cols()) != index.m()) {
    throw ShapeError("scl_sentence_loss: cosine matrix " + shape_str(cosine) + " does not match pairing n=" +
                     std::to_string(index.n()) + ", m=" + std::to_string(index.m()));
  }
  std::vector<int> targets(index.pair_index.begin(), index.pair_index.end());
  return cross_entropy(div_scalar(cosine, tau), targets);
}

Tensor scl_sentence_loss(const BatchPairing& batch, const Tensor& tau) {
  return scl_sentence_loss(cosine_similarity_matrix(batch.sentences, batch.labels), batch.index, tau);
}

Tensor scl_label_loss(const Tensor& cosine, const PairingIndex& index, const Tensor& tau, bool normalize_positives) {
  if (static_cast<std::size_t>(cosine.rows()) != index.n() || static_cast<std::size_t>(cosine.cols()) != index.m()) {
    throw ShapeError("scl_label_loss: cosine matrix " + shape_str(cosine) + " does not match pairing n=" +
                     std::to_string(index.n()) + ", m=" + std::to_string(index.m()));
  }
  // rows: label anchors, columns: candidate sentences
  const Tensor log_probs = log_softmax_rows(div_scalar(transpose(cosine), tau));
  std::vector<std::pair<Index, Index>> entries;
  Matrix weights(static_cast<Index>(index.n()), 1);
  for (std::size_t r = 0; r < index.m(); ++r) {
    const double w = normalize_positives ? 1.0 / static_cast<double>(index.positives[r].size()) : 1.0;
    for (auto s : index.positives[r]) {
      weights(static_cast<Index>(entries.size()), 0) = w;
      entries.emplace_back(static_cast<Index>(r), static_cast<Index>(s));
    }
  }
  Tensor picked = gather(log_probs, entries);
  if (normalize_positives) picked = mul(picked, Tensor::constant(weights.topRows(static_cast<Index>(entries.size()))));
  return scale(sum(picked), -1.0 / static_cast<double>(index.m()));
}

Tensor scl_label_loss(const BatchPairing& batch, const Tensor& tau, bool normalize_positives) {
  return scl_label_loss(cosine_similarity_matrix(batch.sentences, batch.labels), batch.index, tau,
                        normalize_positives);
}

Tensor scl_loss(const BatchPairing& batch, const Tensor& tau, bool normalize_positives) {
  const Tensor cosine = cosine_similarity_matrix(batch.sentences, batch.labels);
  return scl_sentence_loss(cosine, batch.index, tau) + scl_label_loss(cosine, batch.index, tau, normalize_positives);
}

Tensor mlm_loss_pair(const Tensor& sentence_logits, const std::vector<int>& sentence_targets,
                     const Tensor& label_logits, const std::vector<int>& label_targets) {
  return cross_entropy(sentence_logits, sentence_targets) + cross_entropy(label_logits, label_targets);
}

Tensor total_loss(const Tensor& scl, const Tensor& mlm) { return scale(scl, 0.5) + mlm; }

std::string_view to_string(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::Full:
      return "full";
    case ObjectiveMode::SentenceAnchoredOnly:
      return "sentence_anchored_only";
    case ObjectiveMode::LabelAnchoredOnly:
      return "label_anchored_only";
    case ObjectiveMode::NoMlm:
      return "no_mlm";
  }
  return "full";
}

ObjectiveMode objective_mode_from_string(std::string_view name) {
  if (name == "full") return ObjectiveMode::Full;
  if (name == "sentence_anchored_only") return ObjectiveMode::SentenceAnchoredOnly;
  if (name == "label_anchored_only") return ObjectiveMode::LabelAnchoredOnly;
  if (name == "no_mlm") return ObjectiveMode::NoMlm;
  throw DataError("unknown objective_mode '" + std::string(name) + "'");
}

Tensor objective(ObjectiveMode mode, const Tensor& scl_sentence, const Tensor& scl_label, const Tensor& mlm) {
  switch (mode) {
    case ObjectiveMode::Full:
      return total_loss(scl_sentence + scl_label, mlm);
    case ObjectiveMode::SentenceAnchoredOnly:
      return total_loss(scl_sentence, mlm);
    case ObjectiveMode::LabelAnchoredOnly:
      return total_loss(scl_label, mlm);
    case ObjectiveMode::NoMlm:
      return scale(scl_sentence + scl_label, 0.5);
  }
  return total_loss(scl_sentence + scl_label, mlm);
}

}  // namespace sacon

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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/corpus.hpp"
#include "sacon/optim.hpp"
#include "sacon/rng.hpp"
#include "sacon/tensor.hpp"

namespace sacon {

struct EncoderConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_dim = 256;
  int max_seq_len = 64;
  double init_std = 0.02;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

struct TransformerBlock {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1, w2, b2;
};

/// All trainable tensors of one pre-LN transformer encoder with an MLM head.
struct EncoderParams {
  EncoderConfig config;
  Tensor token_embedding;     // V x d
  Tensor position_embedding;  // max_seq_len x d
  Tensor embed_ln_gain, embed_ln_bias;
  std::vector<TransformerBlock> blocks;
  Tensor final_ln_gain, final_ln_bias;
  Tensor mlm_weight;  // d x V
  Tensor mlm_bias;    // 1 x V

  static EncoderParams init(const EncoderConfig& config, Rng& rng);

  /// Fresh leaf tensors holding the same values; shares nothing with *this.
  EncoderParams clone() const;

  /// Stable order; names are `prefix` + "." + field path.
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
};

struct HiddenStates {
  Tensor states;  // tokens x d
  std::size_t cls_pos = 0;
  std::optional<std::size_t> pos_e1s;
  std::optional<std::size_t> pos_e2s;
  std::vector<Index> content_rows;  // rows that are not CLS, SEP or PAD
};

/// Runs the encoder over one token sequence. Ids must be < V and the length
/// at most max_seq_len. [PAD] keys are masked out of attention.
HiddenStates encode(const EncoderParams& params, std::span<const int> tokens);
HiddenStates encode(const EncoderParams& params, const MarkedSequence& sequence);

/// h_cls (+) mean of the content rows; 1 x 2d.
Tensor pool_label(const HiddenStates& h);
/// h[E1s] (+) h[E2s]; 1 x 2d.
Tensor pool_sentence(const HiddenStates& h);

/// |positions| x V vocabulary logits for the given hidden rows.
Tensor mlm_logits(const EncoderParams& params, const HiddenStates& h, const std::vector<Index>& positions);
Tensor mlm_logits(const EncoderParams& params, const Tensor& rows);

/// Inference-only pooled embeddings, one row per input.
Matrix embed_sentences(const EncoderParams& params, const std::vector<MarkedSequence>& sequences);
Matrix embed_labels(const EncoderParams& params, const std::vector<std::vector<int>>& label_sequences);

}  // namespace sacon

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

#include "sacon/encoder.hpp"

#include <cmath>

#include "sacon/errors.hpp"
#include "sacon/vocab.hpp"

namespace sacon {

namespace {

Tensor normal_param(Index rows, Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal(0.0, stddev);
  }
  return Tensor::parameter(std::move(m));
}

Tensor zeros_param(Index rows, Index cols) { return Tensor::parameter(Matrix::Zero(rows, cols)); }
Tensor ones_param(Index rows, Index cols) { return Tensor::parameter(Matrix::Ones(rows, cols)); }
Tensor copy_param(const Tensor& t) { return Tensor::parameter(t.value()); }

template <typename Fn>
void for_each_tensor(const TransformerBlock& b, Fn&& fn) {
  fn("ln1.gain", b.ln1_gain);
  fn("ln1.bias", b.ln1_bias);
  fn("attn.wq", b.wq);
  fn("attn.bq", b.bq);
  fn("attn.wk", b.wk);
  fn("attn.bk", b.bk);
  fn("attn.wv", b.wv);
  fn("attn.bv", b.bv);
  fn("attn.wo", b.wo);
  fn("attn.bo", b.bo);
  fn("ln2.gain", b.ln2_gain);
  fn("ln2.bias", b.ln2_bias);
  fn("ffn.w1", b.w1);
  fn("ffn.b1", b.b1);
  fn("ffn.w2", b.w2);
  fn("ffn.b2", b.b2);
}

Tensor self_attention(const TransformerBlock& blk, const Tensor& x, int n_heads, const Tensor* key_mask) {
  const Index d = x.cols();
  const Index head_dim = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor q = matmul(x, blk.wq) + blk.bq;
  const Tensor k = matmul(x, blk.wk) + blk.bk;
  const Tensor v = matmul(x, blk.wv) + blk.bv;
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const Index off = h * head_dim;
    Tensor scores = scale(matmul(slice_cols(q, off, head_dim), transpose(slice_cols(k, off, head_dim))), inv_sqrt);
    if (key_mask) scores = scores + *key_mask;
    heads.push_back(matmul(softmax_rows(scores), slice_cols(v, off, head_dim)));
  }
  return matmul(concat_cols(heads), blk.wo) + blk.bo;
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size <= special::kCount) throw DataError("encoder: vocab_size must exceed the reserved block");
  if (d_model <= 0 || n_layers < 0 || n_heads <= 0 || ffn_dim <= 0 || max_seq_len <= 0) {
    throw DataError("encoder: dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw DataError("encoder: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                    std::to_string(n_heads));
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"d_model", d_model},         {"n_layers", n_layers},
          {"n_heads", n_heads},       {"ffn_dim", ffn_dim},         {"max_seq_len", max_seq_len},
          {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.init_std = j.at("init_std").get<double>();
  return c;
}

EncoderParams EncoderParams::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const Index d = config.d_model;
  const Index V = config.vocab_size;
  const double s = config.init_std;
  EncoderParams p;
  p.config = config;
  p.token_embedding = normal_param(V, d, s, rng);
  p.position_embedding = normal_param(config.max_seq_len, d, s, rng);
  p.embed_ln_gain = ones_param(1, d);
  p.embed_ln_bias = zeros_param(1, d);
  for (int l = 0; l < config.n_layers; ++l) {
    TransformerBlock b;
    b.ln1_gain = ones_param(1, d);
    b.ln1_bias = zeros_param(1, d);
    b.wq = normal_param(d, d, s, rng);
    b.bq = zeros_param(1, d);
    b.wk = normal_param(d, d, s, rng);
    b.bk = zeros_param(1, d);
    b.wv = normal_param(d, d, s, rng);
    b.bv = zeros_param(1, d);
    b.wo = normal_param(d, d, s, rng);
    b.bo = zeros_param(1, d);
    b.ln2_gain = ones_param(1, d);
    b.ln2_bias = zeros_param(1, d);
    b.w1 = normal_param(d, config.ffn_dim, s, rng);
    b.b1 = zeros_param(1, config.ffn_dim);
    b.w2 = normal_param(config.ffn_dim, d, s, rng);
    b.b2 = zeros_param(1, d);
    p.blocks.push_back(std::move(b));
  }
  p.final_ln_gain = ones_param(1, d);
  p.final_ln_bias = zeros_param(1, d);
  p.mlm_weight = normal_param(d, V, s, rng);
  p.mlm_bias = zeros_param(1, V);
  return p;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams p;
  p.config = config;
  p.token_embedding = copy_param(token_embedding);
  p.position_embedding = copy_param(position_embedding);
  p.embed_ln_gain = copy_param(embed_ln_gain);
  p.embed_ln_bias = copy_param(embed_ln_bias);
  for (const auto& b : blocks) {
    TransformerBlock c;
    c.ln1_gain = copy_param(b.ln1_gain);
    c.ln1_bias = copy_param(b.ln1_bias);
    c.wq = copy_param(b.wq);
    c.bq = copy_param(b.bq);
    c.wk = copy_param(b.wk);
    c.bk = copy_param(b.bk);
    c.wv = copy_param(b.wv);
    c.bv = copy_param(b.bv);
    c.wo = copy_param(b.wo);
    c.bo = copy_param(b.bo);
    c.ln2_gain = copy_param(b.ln2_gain);
    c.ln2_bias = copy_param(b.ln2_bias);
    c.w1 = copy_param(b.w1);
    c.b1 = copy_param(b.b1);
    c.w2 = copy_param(b.w2);
    c.b2 = copy_param(b.b2);
    p.blocks.push_back(std::move(c));
  }
  p.final_ln_gain = copy_param(final_ln_gain);
  p.final_ln_bias = copy_param(final_ln_bias);
  p.mlm_weight = copy_param(mlm_weight);
  p.mlm_bias = copy_param(mlm_bias);
  return p;
}

std::vector<NamedTensor> EncoderParams::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  const std::string root = prefix.empty() ? std::string() : prefix + ".";
  out.push_back({root + "token_embedding", token_embedding});
  out.push_back({root + "position_embedding", position_embedding});
  out.push_back({root + "embed_ln.gain", embed_ln_gain});
  out.push_back({root + "embed_ln.bias", embed_ln_bias});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string block = root + "blocks." + std::to_string(l) + ".";
    for_each_tensor(blocks[l], [&](const char* name, const Tensor& t) { out.push_back({block + name, t}); });
  }
  out.push_back({root + "final_ln.gain", final_ln_gain});
  out.push_back({root + "final_ln.bias", final_ln_bias});
  out.push_back({root + "mlm.weight", mlm_weight});
  out.push_back({root + "mlm.bias", mlm_bias});
  return out;
}

HiddenStates encode(const EncoderParams& params, std::span<const int> tokens) {
  const auto& cfg = params.config;
  if (tokens.empty()) throw DataError("encode: empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.max_seq_len) {
    throw DataError("encode: sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                    std::to_string(cfg.max_seq_len));
  }
  const std::vector<int> ids(tokens.begin(), tokens.end());
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

  HiddenStates h;
  bool any_pad = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == special::kCls && i == 0) h.cls_pos = 0;
    if (ids[i] == special::kPad) any_pad = true;
    if (ids[i] != special::kCls && ids[i] != special::kSep && ids[i] != special::kPad) {
      h.content_rows.push_back(static_cast<Index>(i));
    }
  }

  Tensor key_mask;
  if (any_pad) {
    Matrix m = Matrix::Zero(1, static_cast<Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == special::kPad) m(0, static_cast<Index>(i)) = -1e9;
    }
    key_mask = Tensor::constant(std::move(m));
  }

  Tensor x = embedding(params.token_embedding, ids) + embedding(params.position_embedding, positions);
  x = layer_norm(x, params.embed_ln_gain, params.embed_ln_bias);
  for (const auto& blk : params.blocks) {
    const Tensor a = layer_norm(x, blk.ln1_gain, blk.ln1_bias);
    x = x + self_attention(blk, a, cfg.n_heads, any_pad ? &key_mask : nullptr);
    const Tensor f = layer_norm(x, blk.ln2_gain, blk.ln2_bias);
    x = x + (matmul(gelu(matmul(f, blk.w1) + blk.b1), blk.w2) + blk.b2);
  }
  h.states = layer_norm(x, params.final_ln_gain, params.final_ln_bias);
  return h;
}

HiddenStates encode(const EncoderParams& params, const MarkedSequence& sequence) {
  HiddenStates h = encode(params, std::span<const int>(sequence.tokens));
  h.pos_e1s = sequence.pos_e1s;
  h.pos_e2s = sequence.pos_e2s;
  return h;
}

Tensor pool_label(const HiddenStates& h) {
  if (h.content_rows.empty()) throw DataError("pool_label: sequence has no content tokens");
  const Tensor cls = select_rows(h.states, {static_cast<Index>(h.cls_pos)});
  const Tensor content = mean(select_rows(h.states, h.content_rows), Axis::Rows);
  return concat_cols({cls, content});
}

Tensor pool_sentence(const HiddenStates& h) {
  if (!h.pos_e1s || !h.pos_e2s) throw DataError("pool_sentence: entity marker positions are missing");
  return concat_cols({select_rows(h.states, {static_cast<Index>(*h.pos_e1s)}),
                      select_rows(h.states, {static_cast<Index>(*h.pos_e2s)})});
}

Tensor mlm_logits(const EncoderParams& params, const Tensor& rows) {
  return matmul(rows, params.mlm_weight) + params.mlm_bias;
}

Tensor mlm_logits(const EncoderParams& params, const HiddenStates& h, const std::vector<Index>& positions) {
  if (positions.empty()) return Tensor::constant(Matrix::Zero(0, params.config.vocab_size));
  return mlm_logits(params, select_rows(h.states, positions));
}

Matrix embed_sentences(const EncoderParams& params, const std::vector<MarkedSequence>& sequences) {
  NoGradGuard no_grad;
  Matrix out(static_cast<Index>(sequences.size()), 2 * params.config.d_model);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    out.row(static_cast<Index>(i)) = pool_sentence(encode(params, sequences[i])).value();
  }
  return out;
}

Matrix embed_labels(const EncoderParams& params, const std::vector<std::vector<int>>& label_sequences) {
  NoGradGuard no_grad;
  Matrix out(static_cast<Index>(label_sequences.size()), 2 * params.config.d_model);
  for (std::size_t i = 0; i < label_sequences.size(); ++i) {
    out.row(static_cast<Index>(i)) = pool_label(encode(params, std::span<const int>(label_sequences[i]))).value();
  }
  return out;
}

}  // namespace sacon

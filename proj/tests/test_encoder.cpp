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

#include <doctest.h>

#include "fixtures.hpp"
#include "sacon/encoder.hpp"
#include "sacon/errors.hpp"
#include "sacon/optim.hpp"
#include "sacon/rng.hpp"

using namespace sacon;
namespace sp = sacon::special;

namespace {

EncoderConfig small_config(int vocab = 40, int d = 16) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_dim = 2 * d;
  c.max_seq_len = 16;
  c.init_std = 0.1;
  return c;
}

HiddenStates hidden(const Matrix& states, std::vector<Index> content) {
  HiddenStates h;
  h.states = Tensor::constant(states);
  h.cls_pos = 0;
  h.content_rows = std::move(content);
  return h;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("one row of width d per token, deterministic") {
    Rng rng(1);
    const auto params = EncoderParams::init(small_config(), rng);
    const std::vector<int> tokens = {sp::kCls, 11, 12, 13, sp::kSep};
    const auto a = encode(params, tokens);
    CHECK(a.states.rows() == 5);
    CHECK(a.states.cols() == 16);
    CHECK(a.content_rows == std::vector<Index>{1, 2, 3});
    CHECK(encode(params, tokens).states.value() == a.states.value());
  }

  TEST_CASE("swapping two tokens changes the output") {
    Rng rng(2);
    const auto params = EncoderParams::init(small_config(), rng);
    const auto a = encode(params, std::vector<int>{sp::kCls, 11, 12, 13, sp::kSep});
    const auto b = encode(params, std::vector<int>{sp::kCls, 12, 11, 13, sp::kSep});
    CHECK((a.states.value() - b.states.value()).cwiseAbs().maxCoeff() > 1e-6);
  }

  TEST_CASE("input validation") {
    Rng rng(3);
    const auto params = EncoderParams::init(small_config(), rng);
    CHECK_THROWS_AS(encode(params, std::vector<int>{sp::kCls, 40, sp::kSep}), std::out_of_range);
    CHECK_THROWS_AS(encode(params, std::vector<int>(17, 11)), DataError);
    CHECK_THROWS_AS(encode(params, std::vector<int>{}), DataError);
    auto bad = small_config();
    bad.n_heads = 3;
    CHECK_THROWS_AS(bad.validate(), DataError);
  }

  TEST_CASE("label pooling by hand") {
    const Matrix states = (Matrix(3, 2) << 1, 0, 0, 2, 2, 0).finished();
    CHECK(pool_label(hidden(states, {1, 2})).value() == (Matrix(1, 4) << 1, 0, 1, 1).finished());

    const Matrix u = Matrix::Constant(4, 3, 0.25);
    CHECK(pool_label(hidden(u, {1, 2})).value() == Matrix::Constant(1, 6, 0.25));
    CHECK_THROWS_AS(pool_label(hidden(u, {})), DataError);
  }

  TEST_CASE("sentence pooling selects the marker rows") {
    Rng rng(4);
    Matrix states(9, 2);
    for (Index i = 0; i < 9; ++i) states.row(i) << 2.0 * i + 1, 2.0 * i + 2;
    HiddenStates h = hidden(states, {});
    h.pos_e1s = 1;
    h.pos_e2s = 7;
    CHECK(pool_sentence(h).value() == (Matrix(1, 4) << 3, 4, 15, 16).finished());
    h.pos_e2s.reset();
    CHECK_THROWS_AS(pool_sentence(h), DataError);
  }

  TEST_CASE("pooling is linear in the hidden states") {
    Rng rng(5);
    for (int c = 0; c < 20; ++c) {
      const Matrix states = Matrix::NullaryExpr(6, 4, [&] { return rng.normal(); });
      const double alpha = rng.normal();
      const Matrix p = pool_label(hidden(states, {1, 2, 3, 4})).value();
      const Matrix q = pool_label(hidden(alpha * states, {1, 2, 3, 4})).value();
      CHECK((q - alpha * p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("both pooled halves receive gradient") {
    Rng rng(6);
    Tensor states = Tensor::parameter(Matrix::NullaryExpr(6, 4, [&] { return rng.normal(); }));
    HiddenStates h;
    h.states = states;
    h.content_rows = {1, 2, 3, 4};
    h.pos_e1s = 1;
    h.pos_e2s = 3;
    const Matrix r = Matrix::NullaryExpr(1, 8, [&] { return rng.normal(); });
    sum(mul(pool_label(h), Tensor::constant(r))).backward();
    CHECK(states.grad().row(0).norm() > 0.0);
    CHECK(states.grad().row(2).norm() > 0.0);
    CHECK(states.grad().row(5).norm() == 0.0);

    states.zero_grad();
    sum(mul(pool_sentence(h), Tensor::constant(r))).backward();
    CHECK(states.grad().row(1).norm() > 0.0);
    CHECK(states.grad().row(3).norm() > 0.0);
    CHECK(states.grad().row(2).norm() == 0.0);
  }

  TEST_CASE("MLM logits shapes") {
    Rng rng(7);
    const auto params = EncoderParams::init(small_config(), rng);
    const auto h = encode(params, std::vector<int>{sp::kCls, 11, sp::kMask, sp::kSep});
    const Tensor none = mlm_logits(params, h, {});
    CHECK(none.rows() == 0);
    CHECK(none.cols() == 40);
    CHECK(cross_entropy(none, {}).item() == 0.0);
    const Matrix one = softmax_rows(mlm_logits(params, h, {2})).value();
    CHECK(one.rows() == 1);
    CHECK(std::abs(one.sum() - 1.0) < 1e-12);
  }

  TEST_CASE("a single sentence is memorised within 20 steps") {
    Rng rng(8);
    auto cfg = small_config(40, 32);
    cfg.n_heads = 4;
    auto params = EncoderParams::init(cfg, rng);
    auto named = params.named_parameters("enc");
    auto state = OptimizerState::for_params(named, {1e-2, 0.9, 0.999, 1e-8, 0.0});

    const std::vector<int> sentence = {sp::kCls, 21, 14, 33, 12, 27, 18, sp::kSep};
    double loss = 0.0;
    for (int step = 0; step < 20; ++step) {
      Rng mask_rng = Rng::derive(9, {static_cast<std::uint64_t>(step)});
      const auto masked = apply_mlm_masking(sentence, 1.0, mask_rng);
      std::vector<Index> positions;
      std::vector<int> targets;
      for (const auto& t : masked.targets) {
        positions.push_back(static_cast<Index>(t.position));
        targets.push_back(t.original);
      }
      const Tensor l = cross_entropy(mlm_logits(params, encode(params, masked.tokens), positions), targets);
      loss = l.item();
      zero_grad(named);
      l.backward();
      adamw_step(named, state);
    }
    const auto masked = apply_mlm_masking(sentence, 1.0, rng);
    NoGradGuard guard;
    loss = cross_entropy(mlm_logits(params, encode(params, masked.tokens), {1, 2, 3, 4, 5, 6}),
                         {21, 14, 33, 12, 27, 18})
               .item();
    CHECK(loss < 0.1);
  }

  TEST_CASE("towers are decoupled") {
    auto tiny = fixture::make_tiny();
    auto model = BiEncoder::init(tiny.encoder, 1, true);
    const Matrix s0 = embed_sentences(model.sentence_encoder, tiny.data.marked);
    std::vector<std::vector<int>> labels;
    for (const auto& [id, toks] : tiny.data.label_tokens) labels.push_back(toks);
    const Matrix l0 = embed_labels(model.label_encoder, labels);

    for (auto& p : model.label_encoder.named_parameters("l")) p.tensor.mutable_value().array() += 0.5;
    CHECK(embed_sentences(model.sentence_encoder, tiny.data.marked) == s0);
    CHECK(embed_labels(model.label_encoder, labels) != l0);

    const Matrix l1 = embed_labels(model.label_encoder, labels);
    for (auto& p : model.sentence_encoder.named_parameters("s")) p.tensor.mutable_value().array() *= 1.5;
    CHECK(embed_labels(model.label_encoder, labels) == l1);
  }

  TEST_CASE("clone shares no storage") {
    Rng rng(10);
    const auto a = EncoderParams::init(small_config(), rng);
    auto b = a.clone();
    CHECK(b.token_embedding.value() == a.token_embedding.value());
    b.token_embedding.mutable_value()(0, 0) += 1.0;
    CHECK(b.token_embedding.value() != a.token_embedding.value());
    const auto names = a.named_parameters("x");
    CHECK(names.front().name.rfind("x.", 0) == 0);
  }
}

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

// Small synthetic datasets and models shared by several suites.

#pragma once

#include <filesystem>
#include <string>

#include "sacon/corpus.hpp"
#include "sacon/encoder.hpp"
#include "sacon/synthetic.hpp"
#include "sacon/training.hpp"

namespace fixture {

inline sacon::SynthSpec tiny_spec(int relations = 4, int instances = 6) {
  sacon::SynthSpec s;
  s.n_relations = relations;
  s.instances_per_relation = instances;
  s.vocab_size = 80;
  s.relation_signal = 3;
  s.noise_tokens = 2;
  s.heldout_relations = 0;
  s.background_per_relation = 4;
  s.rng_seed = 5;
  return s;
}

struct Tiny {
  sacon::SynthCorpus corpus;
  sacon::PretrainingData data;
  sacon::PretrainingData background;
  sacon::EncoderConfig encoder;
};

inline Tiny make_tiny(const sacon::SynthSpec& spec = tiny_spec(), int d_model = 16) {
  Tiny t;
  t.corpus = sacon::generate(spec);
  const auto labels = sacon::build_label_dictionary(t.corpus.labels);
  auto tokens = sacon::vocab_corpus(t.corpus.sentences, labels);
  for (const auto& s : t.corpus.background) tokens.push_back(s.tokens);
  const sacon::Vocab vocab = sacon::Vocab::build(tokens, 1);
  t.data = sacon::PretrainingData::build(vocab, labels, t.corpus.sentences, 32);
  t.background = sacon::PretrainingData::build(vocab, labels, t.corpus.background, 32);
  t.encoder.vocab_size = vocab.size();
  t.encoder.d_model = d_model;
  t.encoder.n_layers = 1;
  t.encoder.n_heads = 2;
  t.encoder.ffn_dim = 2 * d_model;
  t.encoder.max_seq_len = 32;
  t.encoder.init_std = 0.1;
  return t;
}

inline sacon::TrainConfig tiny_train(std::size_t batch = 8) {
  sacon::TrainConfig c;
  c.batch_size = batch;
  c.epochs = 2;
  c.warmup_epochs = 1;
  c.lr = 1e-3;
  c.rng_seed = 3;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("sacon_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

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

#include "sacon/synthetic.hpp"

#include <cstdio>
#include <set>

#include "sacon/errors.hpp"
#include "sacon/rng.hpp"

namespace sacon {

namespace {

std::string word(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%04d", i);
  return buf;
}

std::string relation_name(int r) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "R%02d", r);
  return buf;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) {
    if (!s.empty()) s += ' ';
    s += p;
  }
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_relations <= 0 || instances_per_relation <= 0) throw DataError("synth: need at least one relation and instance");
  if (relation_signal < 0 || noise_tokens < 0) throw DataError("synth: signal/noise counts must be non-negative");
  if (background_per_relation < 0) throw DataError("synth: background_per_relation must be non-negative");
  if (heldout_relations < 0 || heldout_relations >= n_relations) {
    throw DataError("synth: heldout_relations must leave at least one pretraining relation");
  }
  if (vocab_size <= n_relations * relation_signal + 4) {
    throw DataError("synth: vocab_size " + std::to_string(vocab_size) + " too small for " +
                    std::to_string(n_relations) + " disjoint signal sets of " + std::to_string(relation_signal));
  }
}

nlohmann::json SynthSpec::to_json() const {
  return {{"n_relations", n_relations},         {"instances_per_relation", instances_per_relation},
          {"vocab_size", vocab_size},           {"relation_signal", relation_signal},
          {"noise_tokens", noise_tokens},       {"heldout_relations", heldout_relations},
          {"background_per_relation", background_per_relation}, {"rng_seed", rng_seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"n_relations",  "instances_per_relation", "vocab_size",
                                              "relation_signal", "noise_tokens", "heldout_relations",
                                              "background_per_relation", "rng_seed"};
  SynthSpec s;
  try {
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) throw DataError("synth spec: unknown key '" + key + "'");
    }
    s.n_relations = j.value("n_relations", s.n_relations);
    s.instances_per_relation = j.value("instances_per_relation", s.instances_per_relation);
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.relation_signal = j.value("relation_signal", s.relation_signal);
    s.noise_tokens = j.value("noise_tokens", s.noise_tokens);
    s.heldout_relations = j.value("heldout_relations", s.heldout_relations);
    s.background_per_relation = j.value("background_per_relation", s.background_per_relation);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<RawSentence> SynthCorpus::sentences_of(const std::vector<std::string>& relation_ids) const {
  const std::set<std::string> wanted(relation_ids.begin(), relation_ids.end());
  std::vector<RawSentence> out;
  for (const auto& s : sentences) {
    if (wanted.count(s.relation_id)) out.push_back(s);
  }
  return out;
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);

  std::vector<int> ids(static_cast<std::size_t>(spec.vocab_size));
  for (int i = 0; i < spec.vocab_size; ++i) ids[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(ids));

  SynthCorpus out;
  std::size_t next = 0;
  for (int r = 0; r < spec.n_relations; ++r) {
    std::vector<std::string> set;
    for (int k = 0; k < spec.relation_signal; ++k) set.push_back(word(ids[next++]));
    out.signal_sets.push_back(std::move(set));
  }
  std::vector<std::string> filler;
  for (; next < ids.size(); ++next) filler.push_back(word(ids[next]));

  auto make_sentence = [&](const std::string& rid, const std::vector<std::string>& signal, Rng& g) {
    // Units are placed as blocks; 0 = head, 1 = tail.
    std::vector<std::vector<std::string>> units;
    for (int e = 0; e < 2; ++e) {
      std::vector<std::string> entity;
      const std::size_t len = 1 + g.index(2);
      for (std::size_t t = 0; t < len; ++t) entity.push_back(filler[g.index(filler.size())]);
      units.push_back(std::move(entity));
    }
    for (const auto& s : signal) units.push_back({s});
    for (int n = 0; n < spec.noise_tokens; ++n) units.push_back({filler[g.index(filler.size())]});

    std::vector<std::size_t> order(units.size());
    for (std::size_t u = 0; u < order.size(); ++u) order[u] = u;
    g.shuffle(std::span<std::size_t>(order));

    RawSentence s;
    s.relation_id = rid;
    for (auto u : order) {
      const Span span{s.tokens.size(), s.tokens.size() + units[u].size()};
      if (u == 0) s.head = span;
      if (u == 1) s.tail = span;
      s.tokens.insert(s.tokens.end(), units[u].begin(), units[u].end());
    }
    return s;
  };

  for (int r = 0; r < spec.n_relations; ++r) {
    const std::string rid = relation_name(r);
    const auto& signal = out.signal_sets[static_cast<std::size_t>(r)];
    (r < spec.n_relations - spec.heldout_relations ? out.pretrain_relations : out.heldout_relations).push_back(rid);

    std::vector<std::string> name = {"rel" + std::to_string(r)};
    for (std::size_t k = 0; k < signal.size() && k < 2; ++k) name.push_back(signal[k]);
    std::vector<std::string> desc = {"relation", "expressed", "by"};
    desc.insert(desc.end(), signal.begin(), signal.end());
    out.labels.push_back({rid, join(name), join(desc)});

    for (int i = 0; i < spec.instances_per_relation; ++i) out.sentences.push_back(make_sentence(rid, signal, rng));
  }
  Rng background_rng = Rng::derive(spec.rng_seed, {1});
  for (int r = 0; r < spec.n_relations; ++r) {
    for (int i = 0; i < spec.background_per_relation; ++i) {
      out.background.push_back(
          make_sentence(relation_name(r), out.signal_sets[static_cast<std::size_t>(r)], background_rng));
    }
  }
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "corpus.jsonl", corpus.sentences);
  write_corpus(dir / "pretrain.jsonl", corpus.sentences_of(corpus.pretrain_relations));
  write_corpus(dir / "heldout.jsonl", corpus.sentences_of(corpus.heldout_relations));
  write_corpus(dir / "background.jsonl", corpus.background);
  write_label_records(dir / "labels.json", corpus.labels);
}

}  // namespace sacon

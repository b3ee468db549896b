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
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sacon/rng.hpp"
#include "sacon/vocab.hpp"

namespace sacon {

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const Span&) const = default;
};

/// Lowercased whitespace split; every ASCII punctuation character becomes its
/// own token.
std::vector<std::string> tokenize(std::string_view text);

// ---- label dictionary -------------------------------------------------------

struct RawLabelRecord {
  std::string relation_id;
  std::string label;
  std::string description;
};

struct LabelEntry {
  std::string relation_id;
  std::vector<std::string> label_text;
  std::vector<std::string> description;

  // label tokens, ":", description tokens
  std::vector<std::string> serialized_tokens() const;
  // "label: description"
  std::string text() const;
};

class LabelDictionary {
 public:
  void add(LabelEntry entry);
  bool contains(std::string_view relation_id) const;
  const LabelEntry& at(std::string_view relation_id) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Insertion order.
  const std::vector<LabelEntry>& entries() const { return entries_; }

 private:
  std::vector<LabelEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Rejects duplicate ids and empty label text with a DataError naming the id.
LabelDictionary build_label_dictionary(const std::vector<RawLabelRecord>& records);

// ---- sentences --------------------------------------------------------------

struct RawSentence {
  std::vector<std::string> tokens;
  Span head;
  Span tail;
  std::string relation_id;
};

struct SentenceInstance {
  std::vector<int> tokens;
  Span head;
  Span tail;
  std::string relation_id;
};

struct MarkedSequence {
  std::vector<int> tokens;
  std::size_t pos_e1s = 0;
  std::size_t pos_e2s = 0;

  bool operator==(const MarkedSequence&) const = default;
};

struct PreprocessConfig {
  double rho_blank = 0.7;
  double mlm_rate = 0.15;
  std::size_t max_seq_len = 64;
  std::uint64_t rng_seed = 0;
};

struct MlmTarget {
  std::size_t position;
  int original;

  bool operator==(const MlmTarget&) const = default;
};

struct MlmMasked {
  std::vector<int> tokens;
  std::vector<MlmTarget> targets;  // ascending position
};

// Throws DataError when spans are empty, out of bounds or overlapping.
void validate_spans(std::size_t length, Span head, Span tail, std::string_view where);

SentenceInstance to_instance(const RawSentence& raw, const Vocab& vocab);

/// [CLS] ... [E1s] head [E1e] ... [E2s] tail [E2e] ... [SEP], markers in the
/// entities' original order. Over-long sentences lose tokens after the last
/// entity; if that is not enough a DataError naming `name` is thrown.
MarkedSequence insert_entity_markers(const SentenceInstance& s, std::size_t max_seq_len, std::string_view name = {});

/// Independently for head then tail: with probability rho the span collapses
/// to a single [BLANK]. Markers survive; pos_e2s/pos_e1s are re-indexed.
MarkedSequence apply_blank_masking(const MarkedSequence& m, double rho_blank, Rng& rng);

/// Each non-structural token is replaced by [MASK] with probability `rate`.
/// Input must not already contain [MASK].
MlmMasked apply_mlm_masking(std::span<const int> tokens, double rate, Rng& rng);

/// [CLS] label : description [SEP], description truncated to fit max_seq_len.
std::vector<int> label_sequence(const LabelEntry& entry, const Vocab& vocab, std::size_t max_seq_len);

/// Token lists for vocabulary construction: every sentence plus every
/// serialized label entry.
std::vector<std::vector<std::string>> vocab_corpus(const std::vector<RawSentence>& sentences,
                                                   const LabelDictionary& labels);

// Throws DataError naming the first relation id that does not resolve.
void check_label_totality(const std::vector<RawSentence>& sentences, const LabelDictionary& labels);

// ---- files ------------------------------------------------------------------

// One JSON object per line: text, head{start,end}, tail{start,end}, relation_id.
// Offsets index tokenize(text).
std::vector<RawSentence> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<RawSentence>& sentences);

// {relation_id: {label, description}}, file order preserved.
std::vector<RawLabelRecord> read_label_records(const std::filesystem::path& path);
void write_label_records(const std::filesystem::path& path, const std::vector<RawLabelRecord>& records);

}  // namespace sacon

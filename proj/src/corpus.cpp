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

#include "sacon/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sacon/errors.hpp"

namespace sacon {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

// ---- label dictionary -------------------------------------------------------

std::vector<std::string> LabelEntry::serialized_tokens() const {
  std::vector<std::string> out = label_text;
  out.emplace_back(":");
  out.insert(out.end(), description.begin(), description.end());
  return out;
}

std::string LabelEntry::text() const {
  auto join = [](const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& p : parts) {
      if (!s.empty()) s += ' ';
      s += p;
    }
    return s;
  };
  std::string s = join(label_text) + ":";
  if (!description.empty()) s += " " + join(description);
  return s;
}

void LabelDictionary::add(LabelEntry entry) {
  if (entry.relation_id.empty()) throw DataError("label dictionary: empty relation id");
  if (entry.label_text.empty()) {
    throw DataError("label dictionary: relation '" + entry.relation_id + "' has empty label text");
  }
  if (index_.count(entry.relation_id)) {
    throw DataError("label dictionary: duplicate relation id '" + entry.relation_id + "'");
  }
  index_.emplace(entry.relation_id, entries_.size());
  entries_.push_back(std::move(entry));
}

bool LabelDictionary::contains(std::string_view relation_id) const {
  return index_.count(std::string(relation_id)) > 0;
}

const LabelEntry& LabelDictionary::at(std::string_view relation_id) const {
  auto it = index_.find(std::string(relation_id));
  if (it == index_.end()) throw DataError("label dictionary: unknown relation id '" + std::string(relation_id) + "'");
  return entries_[it->second];
}

LabelDictionary build_label_dictionary(const std::vector<RawLabelRecord>& records) {
  LabelDictionary dict;
  for (const auto& r : records) {
    dict.add(LabelEntry{r.relation_id, tokenize(r.label), tokenize(r.description)});
  }
  return dict;
}

// ---- sentences --------------------------------------------------------------

void validate_spans(std::size_t length, Span head, Span tail, std::string_view where) {
  auto fail = [&](const std::string& what) { throw DataError(std::string(where) + ": " + what); };
  if (head.start >= head.end) fail("head span is empty");
  if (tail.start >= tail.end) fail("tail span is empty");
  if (head.end > length) fail("head span exceeds sentence length " + std::to_string(length));
  if (tail.end > length) fail("tail span exceeds sentence length " + std::to_string(length));
  if (head.start < tail.end && tail.start < head.end) fail("head and tail spans overlap");
}

SentenceInstance to_instance(const RawSentence& raw, const Vocab& vocab) {
  return SentenceInstance{vocab.encode(raw.tokens), raw.head, raw.tail, raw.relation_id};
}

MarkedSequence insert_entity_markers(const SentenceInstance& s, std::size_t max_seq_len, std::string_view name) {
  const std::string where = name.empty() ? std::string("sentence") : std::string(name);
  validate_spans(s.tokens.size(), s.head, s.tail, where);

  std::size_t keep = s.tokens.size();
  const std::size_t full = keep + 6;
  if (full > max_seq_len) {
    const std::size_t excess = full - max_seq_len;
    const std::size_t trailing = keep - std::max(s.head.end, s.tail.end);
    if (excess > trailing) {
      throw DataError(where + ": cannot fit entity markers within max_seq_len " + std::to_string(max_seq_len));
    }
    keep -= excess;
  }

  MarkedSequence m;
  m.tokens.reserve(keep + 6);
  m.tokens.push_back(special::kCls);
  for (std::size_t i = 0; i < keep; ++i) {
    if (i == s.head.start) {
      m.pos_e1s = m.tokens.size();
      m.tokens.push_back(special::kE1Start);
    }
    if (i == s.tail.start) {
      m.pos_e2s = m.tokens.size();
      m.tokens.push_back(special::kE2Start);
    }
    m.tokens.push_back(s.tokens[i]);
    if (i + 1 == s.head.end) m.tokens.push_back(special::kE1End);
    if (i + 1 == s.tail.end) m.tokens.push_back(special::kE2End);
  }
  m.tokens.push_back(special::kSep);
  return m;
}

namespace {

struct MarkerIndex {
  std::size_t e1s, e1e, e2s, e2e;
};

MarkerIndex locate_markers(const std::vector<int>& tokens) {
  std::array<std::size_t, 4> pos{};
  std::array<int, 4> seen{};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t >= special::kE1Start && t <= special::kE2End) {
      pos[static_cast<std::size_t>(t - special::kE1Start)] = i;
      ++seen[static_cast<std::size_t>(t - special::kE1Start)];
    }
  }
  for (int c : seen) {
    if (c != 1) throw std::invalid_argument("marked sequence must hold exactly one of each entity marker");
  }
  return {pos[0], pos[1], pos[2], pos[3]};
}

}  // namespace

MarkedSequence apply_blank_masking(const MarkedSequence& m, double rho_blank, Rng& rng) {
  const MarkerIndex at = locate_markers(m.tokens);
  const bool blank_head = rng.bernoulli(rho_blank);
  const bool blank_tail = rng.bernoulli(rho_blank);
  if (!blank_head && !blank_tail) return m;

  MarkedSequence out;
  out.tokens.reserve(m.tokens.size());
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    const bool in_head = i > at.e1s && i < at.e1e;
    const bool in_tail = i > at.e2s && i < at.e2e;
    if ((in_head && blank_head) || (in_tail && blank_tail)) continue;
    out.tokens.push_back(m.tokens[i]);
    if ((i == at.e1s && blank_head) || (i == at.e2s && blank_tail)) out.tokens.push_back(special::kBlank);
  }
  const MarkerIndex moved = locate_markers(out.tokens);
  out.pos_e1s = moved.e1s;
  out.pos_e2s = moved.e2s;
  return out;
}

MlmMasked apply_mlm_masking(std::span<const int> tokens, double rate, Rng& rng) {
  MlmMasked out;
  out.tokens.assign(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    const int t = out.tokens[i];
    if (t == special::kMask) throw std::invalid_argument("apply_mlm_masking: input already contains [MASK]");
    if (is_structural(t)) continue;
    if (rng.bernoulli(rate)) {
      out.targets.push_back({i, t});
      out.tokens[i] = special::kMask;
    }
  }
  return out;
}

std::vector<int> label_sequence(const LabelEntry& entry, const Vocab& vocab, std::size_t max_seq_len) {
  if (max_seq_len < 3) throw std::invalid_argument("label_sequence: max_seq_len must be at least 3");
  std::vector<int> ids = vocab.encode(entry.serialized_tokens());
  if (ids.size() > max_seq_len - 2) ids.resize(max_seq_len - 2);
  ids.insert(ids.begin(), special::kCls);
  ids.push_back(special::kSep);
  return ids;
}

std::vector<std::vector<std::string>> vocab_corpus(const std::vector<RawSentence>& sentences,
                                                   const LabelDictionary& labels) {
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences.size() + labels.size());
  for (const auto& s : sentences) out.push_back(s.tokens);
  for (const auto& e : labels.entries()) out.push_back(e.serialized_tokens());
  return out;
}

void check_label_totality(const std::vector<RawSentence>& sentences, const LabelDictionary& labels) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!labels.contains(sentences[i].relation_id)) {
      throw DataError("sentence " + std::to_string(i) + " has relation id '" + sentences[i].relation_id +
                      "' missing from the label dictionary");
    }
  }
}

// ---- files ------------------------------------------------------------------

std::vector<RawSentence> read_corpus(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("corpus: cannot open '" + path.string() + "'");
  std::vector<RawSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      RawSentence s;
      s.tokens = tokenize(j.at("text").get<std::string>());
      s.head = {j.at("head").at("start").get<std::size_t>(), j.at("head").at("end").get<std::size_t>()};
      s.tail = {j.at("tail").at("start").get<std::size_t>(), j.at("tail").at("end").get<std::size_t>()};
      s.relation_id = j.at("relation_id").get<std::string>();
      validate_spans(s.tokens.size(), s.head, s.tail, where);
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<RawSentence>& sentences) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("corpus: cannot write '" + path.string() + "'");
  for (const auto& s : sentences) {
    std::string text;
    for (const auto& t : s.tokens) {
      if (!text.empty()) text += ' ';
      text += t;
    }
    nlohmann::ordered_json j;
    j["text"] = text;
    j["head"] = {{"start", s.head.start}, {"end", s.head.end}};
    j["tail"] = {{"start", s.tail.start}, {"end", s.tail.end}};
    j["relation_id"] = s.relation_id;
    os << j.dump() << "\n";
  }
}

std::vector<RawLabelRecord> read_label_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("labels: cannot open '" + path.string() + "'");
  std::vector<RawLabelRecord> out;
  try {
    const auto j = nlohmann::ordered_json::parse(is);
    if (!j.is_object()) throw DataError("labels: '" + path.string() + "' must hold a JSON object");
    for (const auto& [id, rec] : j.items()) {
      out.push_back({id, rec.at("label").get<std::string>(), rec.at("description").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("labels: '" + path.string() + "': " + e.what());
  }
  return out;
}

void write_label_records(const std::filesystem::path& path, const std::vector<RawLabelRecord>& records) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& r : records) j[r.relation_id] = {{"label", r.label}, {"description", r.description}};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("labels: cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

}  // namespace sacon

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

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace sacon {

// Reserved token ids. They precede every learned id and never move.
namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kMask = 4;
inline constexpr int kBlank = 5;
inline constexpr int kE1Start = 6;
inline constexpr int kE1End = 7;
inline constexpr int kE2Start = 8;
inline constexpr int kE2End = 9;
inline constexpr int kCount = 10;
}  // namespace special

inline constexpr std::array<std::string_view, special::kCount> kReservedTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[BLANK]", "[E1s]", "[E1e]", "[E2s]", "[E2e]"};

// Tokens that are structure rather than text: never MLM targets and never
// part of a mean-pooled label.
inline bool is_structural(int id) {
  return id == special::kPad || id == special::kCls || id == special::kSep || id == special::kBlank ||
         id == special::kMask || (id >= special::kE1Start && id <= special::kE2End);
}

class Vocab {
 public:
  Vocab();

  /// Every token seen at least `min_count` times gets an id, in lexicographic
  /// order after the reserved block. Throws DataError on an empty corpus.
  static Vocab build(const std::vector<std::vector<std::string>>& corpus, int min_count);

  int id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  // {"reserved": [...], "tokens": [...]}; id = position in reserved ++ tokens.
  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  void push(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace sacon

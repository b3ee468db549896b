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

#include "sacon/vocab.hpp"

#include <fstream>
#include <map>

#include "sacon/errors.hpp"

namespace sacon {

Vocab::Vocab() {
  for (auto t : kReservedTokens) push(std::string(t));
}

void Vocab::push(std::string token) {
  const int id = static_cast<int>(id_to_token_.size());
  if (!token_to_id_.emplace(token, id).second) throw DataError("vocab: duplicate token '" + token + "'");
  id_to_token_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (corpus.empty()) throw DataError("build_vocab: corpus is empty");
  std::map<std::string, int> counts;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) ++counts[t];
  }
  Vocab v;
  for (const auto& [token, count] : counts) {
    if (count >= min_count && !v.contains(token)) v.push(token);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

nlohmann::json Vocab::to_json() const {
  nlohmann::json j;
  j["reserved"] = std::vector<std::string>(id_to_token_.begin(), id_to_token_.begin() + special::kCount);
  j["tokens"] = std::vector<std::string>(id_to_token_.begin() + special::kCount, id_to_token_.end());
  return j;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  Vocab v;
  try {
    const auto reserved = j.at("reserved").get<std::vector<std::string>>();
    if (reserved.size() != kReservedTokens.size()) throw DataError("vocab: reserved block has wrong size");
    for (std::size_t i = 0; i < reserved.size(); ++i) {
      if (reserved[i] != kReservedTokens[i]) {
        throw DataError("vocab: reserved id " + std::to_string(i) + " is '" + reserved[i] + "', expected '" +
                        std::string(kReservedTokens[i]) + "'");
      }
    }
    for (const auto& t : j.at("tokens")) v.push(t.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocab: malformed JSON: ") + e.what());
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("vocab: cannot write '" + path.string() + "'");
  os << to_json().dump() << "\n";
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("vocab: cannot open '" + path.string() + "'");
  try {
    return from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("vocab: cannot parse '" + path.string() + "': " + e.what());
  }
}

}  // namespace sacon

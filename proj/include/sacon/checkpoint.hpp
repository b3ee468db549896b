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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/tensor.hpp"

namespace sacon {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<NamedMatrix> tensors;

  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

// Layout: 8-byte magic "SACONCK1", u64 little-endian header length, a JSON
// header {"endianness","dtype","tensors":[{name,shape,offset,count}],"meta"},
// then every tensor as row-major little-endian f64. Offsets are in bytes from
// the start of the data section.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace sacon

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

#include "sacon/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sacon/errors.hpp"

namespace sacon {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'C', 'O', 'N', 'C', 'K', '1'};

std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    x = __builtin_bswap64(x);
  }
  return x;
}

void write_u64(std::ostream& os, std::uint64_t x) {
  x = to_little(x);
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return to_little(x);
}

}  // namespace

const Matrix& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw DataError("checkpoint: no tensor named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["endianness"] = "little";
  header["dtype"] = "f64";
  header["meta"] = ckpt.meta;
  auto entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    const auto count = static_cast<std::uint64_t>(t.value.size());
    entries.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}, {"offset", offset},
                       {"count", count}});
    offset += count * sizeof(double);
  }
  header["tensors"] = entries;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor rm = t.value;
    for (Index i = 0; i < rm.size(); ++i) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(rm.data()[i]);
      write_u64(os, bits);
    }
  }
  if (!os) throw DataError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path.string() + "'");
  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: '" + path.string() + "' is not a checkpoint (bad magic)");
  }
  const std::uint64_t header_len = read_u64(is);
  const auto file_size = std::filesystem::file_size(path);
  if (!is || header_len > file_size) throw DataError("checkpoint: corrupt header length in '" + path.string() + "'");
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw DataError("checkpoint: truncated header in '" + path.string() + "'");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: corrupt header in '" + path.string() + "': " + e.what());
  }
  if (header.value("endianness", "") != "little" || header.value("dtype", "") != "f64") {
    throw DataError("checkpoint: unsupported endianness/dtype in '" + path.string() + "'");
  }

  const std::uint64_t data_start = sizeof(kMagic) + sizeof(std::uint64_t) + header_len;
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  try {
    for (const auto& entry : header.at("tensors")) {
      const auto rows = entry.at("shape").at(0).get<Index>();
      const auto cols = entry.at("shape").at(1).get<Index>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows * cols) != count ||
          data_start + offset + count * sizeof(double) > file_size) {
        throw DataError("checkpoint: tensor '" + entry.at("name").get<std::string>() +
                        "' has inconsistent shape/offset");
      }
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
      is.seekg(static_cast<std::streamoff>(data_start + offset));
      for (Index i = 0; i < rm.size(); ++i) rm.data()[i] = std::bit_cast<double>(read_u64(is));
      if (!is) throw DataError("checkpoint: truncated data in '" + path.string() + "'");
      ckpt.tensors.push_back({entry.at("name").get<std::string>(), Matrix(rm)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: corrupt tensor table in '" + path.string() + "': " + e.what());
  }
  return ckpt;
}

}  // namespace sacon

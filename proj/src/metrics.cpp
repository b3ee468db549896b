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

#include "sacon/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace sacon {

std::size_t pairs_used(Eigen::Index n, const PairSampling& sampling) {
  if (n <= sampling.exhaustive_limit) return static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  return sampling.sampled_pairs;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["align"] = align;
  j["uniform"] = uniform;
  j["positive_pairs"] = positive_pairs;
  j["sentence_count"] = sentence_count;
  j["label_count"] = label_count;
  j["sentence_pairs"] = sentence_pairs;
  j["label_pairs"] = label_pairs;
  return nlohmann::json::parse(j.dump());
}

CorpusEmbeddings embed_corpus(const BiEncoder& model, const PretrainingData& data) {
  CorpusEmbeddings out;
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<std::vector<int>> label_seqs;
  for (const auto& inst : data.instances) {
    auto [it, inserted] = row_of.emplace(inst.relation_id, out.relation_ids.size());
    if (inserted) {
      out.relation_ids.push_back(inst.relation_id);
      label_seqs.push_back(data.label_tokens.at(inst.relation_id));
    }
    out.label_of.push_back(it->second);
  }
  out.sentences = embed_sentences(model.sentence_encoder, data.marked);
  out.labels = embed_labels(model.label_encoder, label_seqs);
  return out;
}

MetricsReport compute_metrics(const CorpusEmbeddings& e, const PairSampling& sampling) {
  Matrix paired(e.sentences.rows(), e.labels.cols());
  for (Index i = 0; i < paired.rows(); ++i) paired.row(i) = e.labels.row(static_cast<Index>(e.label_of[i]));
  MetricsReport r;
  r.align = align_metric(e.sentences, paired);
  r.uniform = uniform_metric(e.sentences, e.labels, sampling);
  r.positive_pairs = static_cast<std::size_t>(e.sentences.rows());
  r.sentence_count = static_cast<std::size_t>(e.sentences.rows());
  r.label_count = static_cast<std::size_t>(e.labels.rows());
  r.sentence_pairs = pairs_used(e.sentences.rows(), sampling);
  r.label_pairs = pairs_used(e.labels.rows(), sampling);
  return r;
}

void export_embeddings(const CorpusEmbeddings& e, const std::vector<std::string>& relation_ids,
                       const std::filesystem::path& path) {
  std::vector<std::size_t> wanted;
  for (const auto& rid : relation_ids) {
    std::size_t row = e.relation_ids.size();
    for (std::size_t i = 0; i < e.relation_ids.size(); ++i) {
      if (e.relation_ids[i] == rid) row = i;
    }
    if (row == e.relation_ids.size()) throw DataError("export: relation '" + rid + "' is not in the corpus");
    wanted.push_back(row);
  }
  const Matrix s = unit_rows(e.sentences, "sentence embedding");
  const Matrix l = unit_rows(e.labels, "label embedding");

  std::ofstream out(path);
  if (!out) throw DataError("export: cannot write " + path.string());
  out << "kind,relation_id";
  for (Index c = 0; c < s.cols(); ++c) out << ",e" << c;
  out << '\n';
  char buf[32];
  auto write_row = [&](const char* kind, const std::string& rid, const auto& row) {
    out << kind << ',' << rid;
    for (Index c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row(c));
      out << ',' << buf;
    }
    out << '\n';
  };
  for (auto r : wanted) {
    for (std::size_t i = 0; i < e.label_of.size(); ++i) {
      if (e.label_of[i] == r) write_row("sentence", e.relation_ids[r], s.row(static_cast<Index>(i)));
    }
  }
  for (auto r : wanted) write_row("label", e.relation_ids[r], l.row(static_cast<Index>(r)));
  if (!out) throw DataError("export: write failed for " + path.string());
}

}  // namespace sacon

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

#include "sacon/episodes.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "sacon/errors.hpp"

namespace sacon {

EpisodeDataset EpisodeDataset::from_relations(const std::vector<std::string>& instance_relations) {
  EpisodeDataset d;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < instance_relations.size(); ++i) {
    auto [it, inserted] = index.emplace(instance_relations[i], d.relation_ids.size());
    if (inserted) {
      d.relation_ids.push_back(instance_relations[i]);
      d.members.emplace_back();
    }
    d.members[it->second].push_back(i);
  }
  return d;
}

std::size_t EpisodeDataset::relation_index(const std::string& relation_id) const {
  for (std::size_t r = 0; r < relation_ids.size(); ++r) {
    if (relation_ids[r] == relation_id) return r;
  }
  throw DataError("episode dataset: unknown relation '" + relation_id + "'");
}

Episode sample_episode(const EpisodeDataset& data, int n, int k, int t, Rng& rng) {
  if (n <= 0 || k < 0 || t <= 0) throw std::invalid_argument("sample_episode: need N > 0, K >= 0, T > 0");
  if (data.relation_ids.size() < static_cast<std::size_t>(n)) {
    throw DataError("sample_episode: dataset has " + std::to_string(data.relation_ids.size()) +
                    " relations, task needs " + std::to_string(n));
  }
  const std::size_t need = static_cast<std::size_t>(k) + static_cast<std::size_t>((t + n - 1) / n);
  for (std::size_t r = 0; r < data.members.size(); ++r) {
    if (data.members[r].size() < need) {
      throw DataError("sample_episode: relation '" + data.relation_ids[r] + "' has " +
                      std::to_string(data.members[r].size()) + " instances, needs " + std::to_string(need));
    }
  }

  std::vector<std::size_t> relations(data.relation_ids.size());
  std::iota(relations.begin(), relations.end(), std::size_t{0});
  Episode ep;
  for (int c = 0; c < n; ++c) {  // partial Fisher-Yates
    const std::size_t j = static_cast<std::size_t>(c) + rng.index(relations.size() - static_cast<std::size_t>(c));
    std::swap(relations[static_cast<std::size_t>(c)], relations[j]);
    ep.classes.push_back(relations[static_cast<std::size_t>(c)]);
  }

  std::vector<std::pair<std::size_t, int>> pool;  // (instance, class position)
  for (int c = 0; c < n; ++c) {
    std::vector<std::size_t> members = data.members[ep.classes[static_cast<std::size_t>(c)]];
    rng.shuffle(std::span<std::size_t>(members));
    ep.support.emplace_back(members.begin(), members.begin() + k);
    for (std::size_t i = static_cast<std::size_t>(k); i < members.size(); ++i) pool.emplace_back(members[i], c);
  }
  for (int q = 0; q < t; ++q) {
    const std::size_t j = static_cast<std::size_t>(q) + rng.index(pool.size() - static_cast<std::size_t>(q));
    std::swap(pool[static_cast<std::size_t>(q)], pool[j]);
    ep.query.push_back(pool[static_cast<std::size_t>(q)].first);
    ep.query_labels.push_back(pool[static_cast<std::size_t>(q)].second);
  }
  return ep;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> prototype_classify(const std::vector<Matrix>& support, const Matrix& queries, bool use_label_info,
                                    const Matrix* label_embs, Similarity sim) {
  if (support.empty()) throw std::invalid_argument("prototype_classify: no classes");
  if (use_label_info && (!label_embs || label_embs->rows() != static_cast<Index>(support.size()))) {
    throw std::invalid_argument("prototype_classify: label information requested without one label per class");
  }
  Matrix prototypes(static_cast<Index>(support.size()), queries.cols());
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (support[c].rows() == 0) {
      throw std::invalid_argument("prototype_classify: class " + std::to_string(c) + " has an empty support set");
    }
    if (support[c].cols() != queries.cols()) throw ShapeError("prototype_classify: support/query widths differ");
    Eigen::RowVectorXd proto = support[c].colwise().mean();
    if (use_label_info) proto = proto.normalized() + label_embs->row(static_cast<Index>(c)).normalized();
    prototypes.row(static_cast<Index>(c)) = proto;
  }
  return argmax_rows(similarity_scores(queries, prototypes, sim));
}

std::vector<int> zero_shot_classify(const Matrix& label_embs, const Matrix& queries) {
  if (label_embs.rows() < 2) throw std::invalid_argument("zero_shot_classify: need at least two classes");
  for (Index r = 0; r < label_embs.rows(); ++r) {
    if (!(label_embs.row(r).norm() > 0.0)) throw DataError("zero_shot_classify: label " + std::to_string(r) + " has zero norm");
  }
  for (Index r = 0; r < queries.rows(); ++r) {
    if (!(queries.row(r).norm() > 0.0)) throw DataError("zero_shot_classify: query " + std::to_string(r) + " has zero norm");
  }
  return argmax_rows(similarity_scores(queries, label_embs, Similarity::Cosine));
}

namespace {

Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(idx[i]));
  return out;
}

}  // namespace

EpisodePredictor fewshot_predictor(Matrix sentence_embs, Matrix label_embs, bool use_label_info, Similarity sim) {
  return [s = std::move(sentence_embs), l = std::move(label_embs), use_label_info, sim](const Episode& ep) {
    std::vector<Matrix> support;
    for (const auto& ids : ep.support) support.push_back(rows_of(s, ids));
    Matrix labels;
    if (use_label_info) labels = rows_of(l, ep.classes);
    return prototype_classify(support, rows_of(s, ep.query), use_label_info, use_label_info ? &labels : nullptr, sim);
  };
}

EpisodePredictor zeroshot_predictor(Matrix sentence_embs, Matrix label_embs) {
  return [s = std::move(sentence_embs), l = std::move(label_embs)](const Episode& ep) {
    return zero_shot_classify(rows_of(l, ep.classes), rows_of(s, ep.query));
  };
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = {{"n", task.n}, {"k", task.k}, {"t", task.t}, {"episodes", task.episodes}, {"seed", seed},
               {"query_sampling", "uniform over leftover instances of the N classes"}};
  j["classifier"] = classifier;
  j["accuracy"] = accuracy;
  j["ci95_half_width"] = ci95_half_width;
  j["per_episode_correct"] = per_episode_correct;
  return nlohmann::json::parse(j.dump());
}

EvalReport evaluate(const EpisodeDataset& data, const TaskSpec& task, std::uint64_t seed,
                    const EpisodePredictor& predict, std::string classifier) {
  if (task.episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
  EvalReport report;
  report.task = task;
  report.seed = seed;
  report.classifier = std::move(classifier);
  std::int64_t correct = 0;
  for (int e = 0; e < task.episodes; ++e) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(e)});
    const Episode ep = sample_episode(data, task.n, task.k, task.t, rng);
    const std::vector<int> pred = predict(ep);
    if (pred.size() != ep.query.size()) throw std::logic_error("evaluate: predictor returned wrong count");
    int c = 0;
    for (std::size_t q = 0; q < pred.size(); ++q) c += pred[q] == ep.query_labels[q] ? 1 : 0;
    report.per_episode_correct.push_back(c);
    correct += c;
  }
  const double total = static_cast<double>(task.episodes) * task.t;
  report.accuracy = static_cast<double>(correct) / total;
  report.ci95_half_width = 1.96 * std::sqrt(report.accuracy * (1.0 - report.accuracy) / total);
  return report;
}

}  // namespace sacon

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

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/rng.hpp"
#include "sacon/tensor.hpp"

namespace sacon {

/// Instances grouped by relation, in first-appearance order.
struct EpisodeDataset {
  std::vector<std::string> relation_ids;
  std::vector<std::vector<std::size_t>> members;  // instance indices per relation

  static EpisodeDataset from_relations(const std::vector<std::string>& instance_relations);
  std::size_t relation_index(const std::string& relation_id) const;
};

struct Episode {
  std::vector<std::size_t> classes;              // N dataset relation indices
  std::vector<std::vector<std::size_t>> support;  // N x K instance indices
  std::vector<std::size_t> query;                // T instance indices
  std::vector<int> query_labels;                 // class position in `classes`
};

struct TaskSpec {
  int n = 5;
  int k = 1;
  int t = 5;
  int episodes = 2000;
};

/// N classes uniformly without replacement, K support each, then T queries
/// drawn uniformly from the leftover instances of those classes. Throws
/// DataError naming a relation with fewer than K + ceil(T/N) instances.
Episode sample_episode(const EpisodeDataset& data, int n, int k, int t, Rng& rng);

enum class Similarity { Cosine, NegativeSquaredEuclidean };

/// Row-wise similarity of every query against every class representative.
template <typename Q, typename C>
Matrix similarity_scores(const Eigen::MatrixBase<Q>& queries, const Eigen::MatrixBase<C>& classes,
                         Similarity sim) {
  if (sim == Similarity::Cosine) {
    const Matrix qn = queries.rowwise().normalized();
    const Matrix cn = classes.rowwise().normalized();
    return qn * cn.transpose();
  }
  Matrix out(queries.rows(), classes.rows());
  for (Index i = 0; i < queries.rows(); ++i) {
    for (Index j = 0; j < classes.rows(); ++j) out(i, j) = -(queries.row(i) - classes.row(j)).squaredNorm();
  }
  return out;
}

/// First maximum per row, so ties go to the lowest class index.
std::vector<int> argmax_rows(const Matrix& scores);

/// Nearest-prototype prediction. Each prototype is the mean of its class's
/// support rows; with label information the L2-normalised prototype and the
/// L2-normalised label embedding are added.
std::vector<int> prototype_classify(const std::vector<Matrix>& support, const Matrix& queries,
                                    bool use_label_info = false, const Matrix* label_embs = nullptr,
                                    Similarity sim = Similarity::Cosine);

/// Cosine matching of queries against label embeddings.
std::vector<int> zero_shot_classify(const Matrix& label_embs, const Matrix& queries);

using EpisodePredictor = std::function<std::vector<int>(const Episode&)>;

/// Few-shot predictor over precomputed sentence embeddings (rows indexed by
/// instance); `label_embs` rows follow EpisodeDataset::relation_ids.
EpisodePredictor fewshot_predictor(Matrix sentence_embs, Matrix label_embs, bool use_label_info, Similarity sim);
EpisodePredictor zeroshot_predictor(Matrix sentence_embs, Matrix label_embs);

struct EvalReport {
  TaskSpec task;
  std::uint64_t seed = 0;
  std::string classifier;
  double accuracy = 0.0;
  double ci95_half_width = 0.0;
  std::vector<int> per_episode_correct;

  nlohmann::json to_json() const;
};

/// Samples `task.episodes` episodes (episode i uses Rng::derive(seed, {i})),
/// predicts and aggregates accuracy with a 95% normal-approximation interval.
EvalReport evaluate(const EpisodeDataset& data, const TaskSpec& task, std::uint64_t seed,
                    const EpisodePredictor& predict, std::string classifier = {});

}  // namespace sacon

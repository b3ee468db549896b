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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacon/errors.hpp"
#include "sacon/rng.hpp"
#include "sacon/training.hpp"

namespace sacon {

/// Row-wise L2 normalisation that refuses zero rows.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> unit_rows(
    const Eigen::MatrixBase<Derived>& x, const char* what = "embedding") {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar norm = out.row(i).norm();
    if (!(norm > Scalar(0))) throw DataError(std::string(what) + " row " + std::to_string(i) + " has zero norm");
    out.row(i) /= norm;
  }
  return out;
}

/// Mean squared distance between normalised rows; row i of `sentences` is
/// paired with row i of `labels`.
template <typename S, typename L>
typename S::Scalar align_metric(const Eigen::MatrixBase<S>& sentences, const Eigen::MatrixBase<L>& labels) {
  if (sentences.rows() == 0) throw DataError("align: need at least one pair");
  if (sentences.rows() != labels.rows() || sentences.cols() != labels.cols()) {
    throw ShapeError("align: sentence and label matrices must have the same shape");
  }
  const auto s = unit_rows(sentences, "sentence embedding");
  const auto l = unit_rows(labels, "label embedding");
  return (s - l).rowwise().squaredNorm().mean();
}

struct PairSampling {
  Eigen::Index exhaustive_limit = 500;  // all distinct pairs up to this many rows
  std::size_t sampled_pairs = 100000;
  std::uint64_t seed = 0;
};

/// log of the mean Gaussian kernel e^{-2 d^2} over distinct pairs of
/// normalised rows. Exhaustive over unordered pairs (equivalent to ordered
/// ones by symmetry) or a fixed-seed sample of distinct ordered pairs.
template <typename Derived>
typename Derived::Scalar log_mean_kernel(const Eigen::MatrixBase<Derived>& x, const PairSampling& sampling = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  if (n < 2) throw DataError("uniform: need at least two embeddings per set");
  const auto u = unit_rows(x);
  auto kernel = [&](Eigen::Index i, Eigen::Index j) {
    return std::exp(Scalar(-2) * (u.row(i) - u.row(j)).squaredNorm());
  };
  Scalar sum(0);
  std::size_t count = 0;
  if (n <= sampling.exhaustive_limit) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        sum += kernel(i, j);
        ++count;
      }
    }
  } else {
    Rng rng(sampling.seed);
    for (; count < sampling.sampled_pairs; ++count) {
      const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
      auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n - 1)));
      if (j >= i) ++j;
      sum += kernel(i, j);
    }
  }
  return std::log(sum / static_cast<Scalar>(count));
}

/// Each set's log-mean-kernel is halved, then the two are added.
template <typename S, typename L>
typename S::Scalar uniform_metric(const Eigen::MatrixBase<S>& sentences, const Eigen::MatrixBase<L>& labels,
                                  const PairSampling& sampling = {}) {
  return log_mean_kernel(sentences, sampling) / 2 + log_mean_kernel(labels, sampling) / 2;
}

/// Number of pairs log_mean_kernel averages over for `n` rows.
std::size_t pairs_used(Eigen::Index n, const PairSampling& sampling);

struct MetricsReport {
  double align = 0.0;
  double uniform = 0.0;
  std::size_t positive_pairs = 0;
  std::size_t sentence_count = 0;
  std::size_t label_count = 0;
  std::size_t sentence_pairs = 0;
  std::size_t label_pairs = 0;

  nlohmann::json to_json() const;
};

/// Sentence and label embeddings of a corpus, unmasked. Label rows follow the
/// order in which relations first appear in the corpus; `label_of[i]` is the
/// label row of sentence i.
struct CorpusEmbeddings {
  Matrix sentences;
  Matrix labels;
  std::vector<std::string> relation_ids;
  std::vector<std::size_t> label_of;
};
CorpusEmbeddings embed_corpus(const BiEncoder& model, const PretrainingData& data);

MetricsReport compute_metrics(const CorpusEmbeddings& e, const PairSampling& sampling = {});

/// CSV with header `kind,relation_id,e0,...`: the sentences of each requested
/// relation in corpus order, then one label row per relation. Vectors are
/// unit-normalised. Throws DataError on a relation id absent from the corpus.
void export_embeddings(const CorpusEmbeddings& e, const std::vector<std::string>& relation_ids,
                       const std::filesystem::path& path);

}  // namespace sacon

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

#include <doctest.h>

#include <algorithm>
#include <set>

#include "sacon/errors.hpp"
#include "sacon/episodes.hpp"
#include "sacon/rng.hpp"

using namespace sacon;

namespace {

// `per` instances for each of `relations` relations, grouped.
EpisodeDataset grouped(int relations, int per) {
  std::vector<std::string> rel;
  for (int r = 0; r < relations; ++r) {
    for (int i = 0; i < per; ++i) rel.push_back("R" + std::to_string(r));
  }
  return EpisodeDataset::from_relations(rel);
}

Matrix one_hot_rows(const EpisodeDataset& d, int width) {
  std::size_t n = 0;
  for (const auto& m : d.members) n += m.size();
  Matrix out = Matrix::Zero(static_cast<Index>(n), width);
  for (std::size_t r = 0; r < d.members.size(); ++r) {
    for (auto i : d.members[r]) out(static_cast<Index>(i), static_cast<Index>(r)) = 1.0;
  }
  return out;
}

}  // namespace

TEST_SUITE("episodes") {
  TEST_CASE("dataset groups instances in order of first appearance") {
    const auto d = EpisodeDataset::from_relations({"b", "a", "b", "c"});
    CHECK(d.relation_ids == std::vector<std::string>{"b", "a", "c"});
    CHECK(d.members[0] == std::vector<std::size_t>{0, 2});
    CHECK(d.relation_index("c") == 2);
    CHECK_THROWS_AS(d.relation_index("z"), DataError);
  }

  TEST_CASE("episode cardinalities and disjointness") {
    const auto d = grouped(8, 6);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const int n = 2 + static_cast<int>(seed % 4), k = static_cast<int>(seed % 3), t = 1 + static_cast<int>(seed % 7);
      const Episode ep = sample_episode(d, n, k, t, rng);
      CHECK(ep.classes.size() == static_cast<std::size_t>(n));
      CHECK(std::set<std::size_t>(ep.classes.begin(), ep.classes.end()).size() == ep.classes.size());
      CHECK(ep.query.size() == static_cast<std::size_t>(t));
      std::set<std::size_t> support;
      for (std::size_t c = 0; c < ep.support.size(); ++c) {
        CHECK(ep.support[c].size() == static_cast<std::size_t>(k));
        for (auto i : ep.support[c]) {
          support.insert(i);
          const auto& members = d.members[ep.classes[c]];
          CHECK(std::find(members.begin(), members.end(), i) != members.end());
        }
      }
      CHECK(support.size() == static_cast<std::size_t>(n * k));
      CHECK(std::set<std::size_t>(ep.query.begin(), ep.query.end()).size() == ep.query.size());
      for (std::size_t q = 0; q < ep.query.size(); ++q) {
        CHECK_FALSE(support.count(ep.query[q]));
        const auto& members = d.members[ep.classes[static_cast<std::size_t>(ep.query_labels[q])]];
        CHECK(std::find(members.begin(), members.end(), ep.query[q]) != members.end());
      }
    }
  }

  TEST_CASE("5-way 1-shot with 5 queries") {
    Rng rng(1);
    const Episode ep = sample_episode(grouped(10, 4), 5, 1, 5, rng);
    std::size_t support = 0;
    for (const auto& s : ep.support) support += s.size();
    CHECK(support == 5);
    CHECK(ep.query.size() == 5);
    CHECK(ep.classes.size() == 5);
  }

  TEST_CASE("zero shots give an empty support set") {
    Rng rng(2);
    const Episode ep = sample_episode(grouped(5, 3), 5, 0, 5, rng);
    for (const auto& s : ep.support) CHECK(s.empty());
    CHECK(ep.query.size() == 5);
  }

  TEST_CASE("same seed, same episode") {
    const auto d = grouped(10, 5);
    Rng a(9), b(9);
    const Episode x = sample_episode(d, 5, 2, 5, a);
    const Episode y = sample_episode(d, 5, 2, 5, b);
    CHECK(x.classes == y.classes);
    CHECK(x.support == y.support);
    CHECK(x.query == y.query);
    CHECK(x.query_labels == y.query_labels);
  }

  TEST_CASE("thin relations are named") {
    std::vector<std::string> rel = {"A", "A", "A", "B", "B", "B", "thin"};
    const auto d = EpisodeDataset::from_relations(rel);
    Rng rng(3);
    try {
      sample_episode(d, 3, 1, 3, rng);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("thin") != std::string::npos);
    }
    CHECK_THROWS_AS(sample_episode(d, 4, 1, 3, rng), DataError);
  }

  TEST_CASE("prototype classification by hand") {
    Matrix p0 = Matrix::Zero(1, 4), p1 = Matrix::Zero(1, 4);
    p0(0, 0) = 1.0;
    p1(0, 1) = 1.0;
    Matrix q = Matrix::Zero(1, 4);
    q(0, 0) = 0.9;
    q(0, 1) = 0.1;
    CHECK(prototype_classify({p0, p1}, q) == std::vector<int>{0});
    CHECK(prototype_classify({p0, p1}, q, false, nullptr, Similarity::NegativeSquaredEuclidean) == std::vector<int>{0});

    CHECK(prototype_classify({p1, p1}, q) == std::vector<int>{0});
    CHECK(argmax_rows((Matrix(2, 3) << 0.5, 0.5, 0.1, 0.2, 0.7, 0.7).finished()) == std::vector<int>{0, 1});
    CHECK_THROWS_AS(prototype_classify({p0, Matrix(0, 4)}, q), std::invalid_argument);
  }

  TEST_CASE("a query equal to a support embedding is assigned to it") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Matrix> support;
      for (int c = 0; c < 5; ++c) support.push_back(Matrix::NullaryExpr(1, 8, [&] { return rng.normal(); }));
      const int target = static_cast<int>(rng.index(5));
      CHECK(prototype_classify(support, support[static_cast<std::size_t>(target)]) == std::vector<int>{target});
    }
  }

  TEST_CASE("label information shifts the prototype") {
    const Matrix s0 = (Matrix(1, 2) << 1, 0).finished();
    const Matrix s1 = (Matrix(1, 2) << 0, 1).finished();
    const Matrix q = (Matrix(1, 2) << 0.6, 0.4).finished();
    const Matrix labels = (Matrix(2, 2) << 0, 3, 0, 1).finished();
    CHECK(prototype_classify({s0, s1}, q) == std::vector<int>{0});
    // prototype 0 becomes [1,1]/|.|-free sum = [1, 1]; prototype 1 = [0, 2].
    CHECK(prototype_classify({s0, s1}, q, true, &labels) == std::vector<int>{0});
    const Matrix q2 = (Matrix(1, 2) << 0.45, 0.55).finished();
    CHECK(prototype_classify({s0, s1}, q2) == std::vector<int>{1});
    CHECK(prototype_classify({s0, s1}, q2, true, &labels) == std::vector<int>{0});
    CHECK_THROWS_AS(prototype_classify({s0, s1}, q, true, nullptr), std::invalid_argument);
  }

  TEST_CASE("zero-shot matching") {
    Rng rng(5);
    const Matrix labels = Matrix::NullaryExpr(4, 6, [&] { return rng.normal(); });
    CHECK(zero_shot_classify(labels, labels) == std::vector<int>{0, 1, 2, 3});
    const Matrix same = labels.row(0).replicate(4, 1);
    CHECK(zero_shot_classify(same, labels) == std::vector<int>{0, 0, 0, 0});
    CHECK_THROWS_AS(zero_shot_classify(labels.topRows(1), labels), std::invalid_argument);
    Matrix zero = labels;
    zero.row(2).setZero();
    CHECK_THROWS_AS(zero_shot_classify(zero, labels), DataError);
  }

  TEST_CASE("positive rescaling changes no prediction") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Matrix> support, scaled;
      for (int c = 0; c < 4; ++c) {
        support.push_back(Matrix::NullaryExpr(2, 6, [&] { return rng.normal(); }));
        scaled.push_back(support.back() * (0.1 + 10.0 * rng.uniform()));
      }
      const Matrix q = Matrix::NullaryExpr(5, 6, [&] { return rng.normal(); });
      const Matrix labels = Matrix::NullaryExpr(4, 6, [&] { return rng.normal(); });
      const double a = 0.01 + 100.0 * rng.uniform();
      CHECK(prototype_classify(support, q) == prototype_classify(scaled, a * q));
      const Matrix scaled_labels = labels * 3.0;
      CHECK(prototype_classify(support, q, true, &labels) == prototype_classify(scaled, a * q, true, &scaled_labels));
      CHECK(zero_shot_classify(labels, q) == zero_shot_classify(7.0 * labels, a * q));
    }
  }

  TEST_CASE("single-shot prototype is the support embedding") {
    Rng rng(7);
    const Matrix s = Matrix::NullaryExpr(1, 5, [&] { return rng.normal(); });
    const Matrix other = Matrix::NullaryExpr(1, 5, [&] { return rng.normal(); });
    // Euclidean distance to the prototype is zero only if it equals s exactly.
    const Matrix scores = similarity_scores(s, s, Similarity::NegativeSquaredEuclidean);
    CHECK(scores(0, 0) == 0.0);
    CHECK(prototype_classify({other, s}, s, false, nullptr, Similarity::NegativeSquaredEuclidean) == std::vector<int>{1});
  }

  TEST_CASE("perfect and random classifiers") {
    const auto d = grouped(10, 10);
    const Matrix embs = one_hot_rows(d, 10);
    const TaskSpec task{5, 1, 5, 2000};
    const auto perfect = evaluate(d, task, 7, fewshot_predictor(embs, embs.topRows(10), false, Similarity::Cosine));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.per_episode_correct.size() == 2000);

    Rng guess(123);
    const auto random = evaluate(d, task, 7, [&](const Episode& ep) {
      std::vector<int> out;
      for (std::size_t q = 0; q < ep.query.size(); ++q) out.push_back(static_cast<int>(guess.index(5)));
      return out;
    });
    MESSAGE("random accuracy " << random.accuracy);
    CHECK(random.accuracy >= 0.18);
    CHECK(random.accuracy <= 0.22);
    int total = 0;
    for (int c : random.per_episode_correct) total += c;
    CHECK(random.accuracy == doctest::Approx(total / 10000.0).epsilon(1e-15));
    CHECK(random.ci95_half_width == doctest::Approx(1.96 * std::sqrt(random.accuracy * (1 - random.accuracy) / 10000)));
  }

  TEST_CASE("evaluation is reproducible and rejects zero episodes") {
    const auto d = grouped(6, 5);
    Rng rng(8);
    const Matrix embs = Matrix::NullaryExpr(30, 4, [&] { return rng.normal(); });
    const TaskSpec task{5, 1, 5, 100};
    const auto a = evaluate(d, task, 3, fewshot_predictor(embs, Matrix(), false, Similarity::Cosine));
    const auto b = evaluate(d, task, 3, fewshot_predictor(embs, Matrix(), false, Similarity::Cosine));
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_json()["task"]["n"] == 5);
    CHECK_THROWS_AS(evaluate(d, {5, 1, 5, 0}, 3, fewshot_predictor(embs, Matrix(), false, Similarity::Cosine)),
                    std::invalid_argument);
  }
}

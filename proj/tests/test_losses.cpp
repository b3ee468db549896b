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

#include <cmath>

#include "oracles.hpp"
#include "sacon/errors.hpp"
#include "sacon/gradcheck.hpp"
#include "sacon/losses.hpp"
#include "sacon/rng.hpp"

using namespace sacon;

namespace {

Tensor tau_of(double v) { return Tensor::scalar(v); }

Matrix random_matrix(Index r, Index c, Rng& rng) {
  return Matrix::NullaryExpr(r, c, [&] { return rng.normal(); });
}

oracle::Mat to_mat(const Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return out;
}

std::vector<std::string> random_relations(std::size_t n, std::size_t kinds, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("r" + std::to_string(rng.index(kinds)));
  return out;
}

const PairingIndex kDiagonal = PairingIndex::from_relations({"a", "b"});

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("cosine similarity by hand") {
    const Matrix s = (Matrix(3, 4) << 1, 0, 0, 0, 2, -1, 0, 3, 0, 0, 5, 0).finished();
    const Matrix l = (Matrix(2, 4) << 1, 1, 0, 0, -2, 1, 0, -3).finished();
    const Matrix c = cosine_similarity_matrix(Tensor::constant(s), Tensor::constant(l)).value();
    CHECK(c(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(c(1, 1) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(cosine_similarity_matrix(Tensor::constant(s), Tensor::constant(s)).value()(2, 2) ==
          doctest::Approx(1.0).epsilon(1e-15));
    const auto ref = oracle::cosine_matrix(to_mat(s), to_mat(l));
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 2; ++j) CHECK(c(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-14));
    }
  }

  TEST_CASE("zero rows are named") {
    const Matrix s = (Matrix(2, 2) << 1, 0, 0, 0).finished();
    try {
      cosine_similarity_matrix(Tensor::constant(s), Tensor::constant(Matrix::Ones(1, 2)));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    CHECK_THROWS_AS(cosine_similarity_matrix(Tensor::constant(Matrix::Ones(1, 2)), Tensor::constant(Matrix::Ones(1, 3))),
                    ShapeError);
  }

  TEST_CASE("pairing deduplicates labels in order of appearance") {
    const auto p = PairingIndex::from_relations({"x", "y", "x", "z", "y"});
    CHECK(p.label_ids == std::vector<std::string>{"x", "y", "z"});
    CHECK(p.pair_index == std::vector<std::size_t>{0, 1, 0, 2, 1});
    CHECK(p.positives[1] == std::vector<std::size_t>{1, 4});
    CHECK_NOTHROW(p.validate());
    auto broken = p;
    broken.positives[2].clear();
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
  }

  TEST_CASE("single pair gives zero loss") {
    const auto p = PairingIndex::from_relations({"a"});
    const Tensor c = Tensor::constant(Matrix::Constant(1, 1, 0.3));
    CHECK(scl_sentence_loss(c, p, tau_of(0.07)).item() == 0.0);
    CHECK(scl_label_loss(c, p, tau_of(0.07)).item() == 0.0);
  }

  TEST_CASE("identity cosine, tau 1") {
    const Tensor c = Tensor::constant(Matrix::Identity(2, 2));
    const double expected = std::log(1.0 + std::exp(-1.0));
    CHECK(expected == doctest::Approx(0.313262).epsilon(1e-6));
    const double s = scl_sentence_loss(c, kDiagonal, tau_of(1.0)).item();
    const double l = scl_label_loss(c, kDiagonal, tau_of(1.0)).item();
    CHECK(s == doctest::Approx(expected).epsilon(1e-14));
    CHECK(l == doctest::Approx(expected).epsilon(1e-14));
    CHECK(s + l == doctest::Approx(0.626524).epsilon(1e-6));
  }

  TEST_CASE("label anchor with two equal positives") {
    const auto p = PairingIndex::from_relations({"a", "a"});
    const Tensor c = Tensor::constant(Matrix::Constant(2, 1, 0.4));
    CHECK(scl_label_loss(c, p, tau_of(0.5)).item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(scl_label_loss(c, p, tau_of(0.5), true).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }

  TEST_CASE("uniform similarities give log m and the weighted log n") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 2 + rng.index(12);
      const auto p = PairingIndex::from_relations(random_relations(n, 1 + rng.index(5), rng));
      const Tensor c = Tensor::constant(Matrix::Constant(static_cast<Index>(n), static_cast<Index>(p.m()), 0.2));
      const double m = static_cast<double>(p.m());
      CHECK(std::abs(scl_sentence_loss(c, p, tau_of(0.07)).item() - std::log(m)) < 1e-9);
      double weighted = 0.0;
      for (const auto& a : p.positives) weighted += static_cast<double>(a.size()) / m * std::log(static_cast<double>(n));
      CHECK(std::abs(scl_label_loss(c, p, tau_of(0.07)).item() - weighted) < 1e-9);
    }
  }

  TEST_CASE("random batches agree with the loop reference") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.index(10);
      const auto p = PairingIndex::from_relations(random_relations(n, 1 + rng.index(6), rng));
      const Matrix s = random_matrix(static_cast<Index>(n), 6, rng);
      const Matrix l = random_matrix(static_cast<Index>(p.m()), 6, rng);
      const double tau = 0.05 + rng.uniform();
      const BatchPairing b{Tensor::constant(s), Tensor::constant(l), p};
      const auto c = oracle::cosine_matrix(to_mat(s), to_mat(l));
      const double ss = scl_sentence_loss(b, tau_of(tau)).item();
      const double ll = scl_label_loss(b, tau_of(tau)).item();
      CHECK(ss == doctest::Approx(oracle::scl_sentence(c, p.pair_index, tau)).epsilon(1e-12));
      CHECK(ll == doctest::Approx(oracle::scl_label(c, p.positives, tau)).epsilon(1e-12));
      CHECK(scl_label_loss(b, tau_of(tau), true).item() ==
            doctest::Approx(oracle::scl_label(c, p.positives, tau, true)).epsilon(1e-12));
      CHECK(ss >= 0.0);
      CHECK(ll >= 0.0);
      // The combined loss is the plain sum of the two directions, to the last bit.
      CHECK(scl_loss(b, tau_of(tau)).item() == ss + ll);
    }
  }

  TEST_CASE("lower temperature lowers both losses on a separable batch") {
    Rng rng(5);
    const auto p = PairingIndex::from_relations({"a", "b", "c", "a", "b"});
    for (int trial = 0; trial < 20; ++trial) {
      // Each label's positives share one cosine; different labels differ.
      std::vector<double> positive(p.m());
      for (auto& v : positive) v = 0.6 + 0.3 * rng.uniform();
      Matrix c(5, 3);
      for (Index i = 0; i < 5; ++i) {
        for (Index j = 0; j < 3; ++j) {
          const auto label = p.pair_index[static_cast<std::size_t>(i)];
          c(i, j) = static_cast<std::size_t>(j) == label ? positive[label] : 0.5 * rng.uniform() - 0.2;
        }
      }
      const Tensor ct = Tensor::constant(c);
      double prev_s = INFINITY, prev_l = INFINITY;
      for (double tau : {1.0, 0.5, 0.2, 0.1, 0.05}) {
        const double s = scl_sentence_loss(ct, p, tau_of(tau)).item();
        const double l = scl_label_loss(ct, p, tau_of(tau)).item();
        CHECK(s < prev_s);
        CHECK(l < prev_l);
        prev_s = s;
        prev_l = l;
      }
    }
  }

  TEST_CASE("sentence-anchored loss falls with temperature even when positives differ") {
    Rng rng(15);
    const auto p = PairingIndex::from_relations({"a", "b", "c", "a"});
    for (int trial = 0; trial < 20; ++trial) {
      Matrix c(4, 3);
      for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 3; ++j) {
          c(i, j) = static_cast<std::size_t>(j) == p.pair_index[static_cast<std::size_t>(i)] ? 0.6 + 0.3 * rng.uniform()
                                                                                               : 0.5 * rng.uniform() - 0.2;
        }
      }
      double prev = INFINITY;
      for (double tau : {1.0, 0.5, 0.2, 0.1, 0.05}) {
        const double s = scl_sentence_loss(Tensor::constant(c), p, tau_of(tau)).item();
        CHECK(s < prev);
        prev = s;
      }
    }
  }

  TEST_CASE("MLM loss values") {
    const Matrix logits = (Matrix(1, 4) << 2, 0, 0, 0).finished();
    const double one = mlm_loss_pair(Tensor::constant(logits), {0}, Tensor::constant(Matrix(0, 4)), {}).item();
    CHECK(one == doctest::Approx(std::log(std::exp(2.0) + 3.0) - 2.0).epsilon(1e-14));
    CHECK(std::abs(one - 0.3407) < 1e-4);

    CHECK(mlm_loss_pair(Tensor::constant(Matrix(0, 4)), {}, Tensor::constant(Matrix(0, 4)), {}).item() == 0.0);

    const Matrix uniform = Matrix::Constant(3, 7, 0.25);
    const double both = mlm_loss_pair(Tensor::constant(uniform), {0, 3, 6}, Tensor::constant(uniform.topRows(2)), {1, 2})
                            .item();
    CHECK(both == doctest::Approx(2.0 * std::log(7.0)).epsilon(1e-14));
    CHECK_THROWS_AS(mlm_loss_pair(Tensor::constant(logits), {4}, Tensor::constant(Matrix(0, 4)), {}), std::out_of_range);
  }

  TEST_CASE("total loss arithmetic and objective modes") {
    CHECK(total_loss(Tensor::scalar(0.0), Tensor::scalar(0.0)).item() == 0.0);
    CHECK(total_loss(Tensor::scalar(2.0), Tensor::scalar(1.0)).item() == 2.0);
    CHECK(std::abs(total_loss(Tensor::scalar(0.6265), Tensor::scalar(1.3863)).item() - 1.6996) < 1e-4);

    const Tensor s = Tensor::scalar(0.3), l = Tensor::scalar(0.5), m = Tensor::scalar(1.1);
    CHECK(objective(ObjectiveMode::Full, s, l, m).item() == doctest::Approx(0.4 + 1.1));
    CHECK(objective(ObjectiveMode::SentenceAnchoredOnly, s, l, m).item() == doctest::Approx(0.15 + 1.1));
    CHECK(objective(ObjectiveMode::LabelAnchoredOnly, s, l, m).item() == doctest::Approx(0.25 + 1.1));
    CHECK(objective(ObjectiveMode::NoMlm, s, l, m).item() == doctest::Approx(0.4));
    for (auto mode : {ObjectiveMode::Full, ObjectiveMode::SentenceAnchoredOnly, ObjectiveMode::LabelAnchoredOnly,
                      ObjectiveMode::NoMlm}) {
      CHECK(objective_mode_from_string(to_string(mode)) == mode);
    }
    CHECK_THROWS_AS(objective_mode_from_string("both"), DataError);
  }

  TEST_CASE("temperature starts at 0.07 and is clamped at 0.01") {
    Temperature t;
    CHECK(t.get() == 0.07);
    t.value.mutable_value()(0, 0) = 0.001;
    t.clamp();
    CHECK(t.get() == 0.01);
    t.value.mutable_value()(0, 0) = 0.5;
    t.clamp();
    CHECK(t.get() == 0.5);
  }

  TEST_CASE("gradients of the combined loss match finite differences of the reference") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng.index(6);
      const auto p = PairingIndex::from_relations(random_relations(n, 1 + rng.index(4), rng));
      Tensor s = Tensor::parameter(random_matrix(static_cast<Index>(n), 4, rng));
      Tensor l = Tensor::parameter(random_matrix(static_cast<Index>(p.m()), 4, rng));
      Tensor tau = Tensor::parameter(Matrix::Constant(1, 1, 0.3 + rng.uniform()));
      const double mlm = rng.uniform();
      total_loss(scl_loss({s, l, p}, tau), Tensor::scalar(mlm)).backward();

      auto reference = [&] {
        const auto c = oracle::cosine_matrix(to_mat(s.value()), to_mat(l.value()));
        const double t = tau.value()(0, 0);
        return 0.5 * (oracle::scl_sentence(c, p.pair_index, t) + oracle::scl_label(c, p.positives, t)) + mlm;
      };
      for (Tensor* leaf : {&s, &l, &tau}) {
        for (Index i = 0; i < leaf->rows(); ++i) {
          for (Index j = 0; j < leaf->cols(); ++j) {
            const double numeric = central_difference(reference, *leaf, i, j, 1e-5);
            CHECK(relative_error(leaf->grad()(i, j), numeric, 1e-8) < 1e-5);
          }
        }
      }
    }
  }
}

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

#include <fstream>

#include "fixtures.hpp"
#include "sacon/config.hpp"
#include "sacon/errors.hpp"

using namespace sacon;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("defaults round trip through JSON") {
    const RunConfig a;
    const RunConfig b = RunConfig::from_json(a.to_json());
    CHECK(b.to_json() == a.to_json());
    CHECK(json::parse(default_config_text()) == a.to_json());
    CHECK(a.train.batch_size == 32);
    CHECK(a.train.epochs == 30);
    CHECK(a.train.lr == 1e-3);
    CHECK(a.encoder.d_model == 64);
    CHECK(a.encoder.n_layers == 2);
    CHECK(a.encoder.n_heads == 4);
    CHECK(a.preprocess.rho_blank == 0.7);
  }

  TEST_CASE("every section is read") {
    const json j = {{"corpus", "c.jsonl"},
                    {"labels", "l.json"},
                    {"background", "b.jsonl"},
                    {"vocab", {{"min_count", 2}}},
                    {"encoder", {{"d_model", 32}, {"n_heads", 2}, {"ffn_dim", 64}}},
                    {"train",
                     {{"batch_size", 16},
                      {"objective_mode", "label_anchored_only"},
                      {"sampler", "class_balanced"},
                      {"warmup_epochs", 3}}},
                    {"preprocess", {{"rho_blank", 0.5}}},
                    {"eval", {{"n", 10}, {"k", 5}, {"label_info", true}, {"similarity", "neg_sq_euclidean"}}}};
    const RunConfig c = RunConfig::from_json(j);
    CHECK(c.background == "b.jsonl");
    CHECK(c.vocab_min_count == 2);
    CHECK(c.encoder.d_model == 32);
    CHECK(c.train.batch_size == 16);
    CHECK(c.train.objective_mode == ObjectiveMode::LabelAnchoredOnly);
    CHECK(c.train.sampler == SamplerKind::ClassBalanced);
    CHECK(c.train.warmup_epochs == 3);
    CHECK(c.preprocess.rho_blank == 0.5);
    CHECK(c.eval.task.n == 10);
    CHECK(c.eval.task.k == 5);
    CHECK(c.eval.label_info);
    CHECK(c.eval.similarity == Similarity::NegativeSquaredEuclidean);
  }

  TEST_CASE("unknown keys are rejected wherever they appear") {
    for (const json& j : {json{{"corpuss", "x"}}, json{{"train", {{"epoch", 3}}}}, json{{"encoder", {{"depth", 3}}}},
                          json{{"eval", {{"ways", 5}}}}, json{{"vocab", {{"min", 1}}}},
                          json{{"preprocess", {{"mask", 0.1}}}}}) {
      try {
        RunConfig::from_json(j);
        FAIL("expected DataError for " << j.dump());
      } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
      }
    }
  }

  TEST_CASE("bad values are rejected") {
    CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"sampler", "stratified"}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"objective_mode", "both"}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"batch_size", "many"}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"preprocess", {{"rho_blank", 1.5}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"preprocess", {{"max_seq_len", 128}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"eval", {{"n", 1}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json({{"eval", {{"similarity", "dot"}}}}), DataError);
    CHECK_THROWS_AS(RunConfig::from_json(json::array()), DataError);
  }

  TEST_CASE("relative paths resolve against the config file") {
    fixture::TempDir dir("config_paths");
    std::filesystem::create_directories(dir / "sub");
    {
      std::ofstream os(dir / "sub" / "run.json");
      os << json{{"corpus", "data/c.jsonl"}, {"labels", "/abs/l.json"}, {"eval", {{"corpus", "h.jsonl"}}}}.dump();
    }
    const RunConfig c = RunConfig::load(dir / "sub" / "run.json");
    CHECK(c.corpus == dir / "sub" / "data" / "c.jsonl");
    CHECK(c.labels == "/abs/l.json");
    CHECK(c.eval.corpus == dir / "sub" / "h.jsonl");
    CHECK(c.background.empty());

    {
      std::ofstream os(dir / "broken.json");
      os << "{ not json";
    }
    CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), DataError);
    CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), DataError);
  }
}

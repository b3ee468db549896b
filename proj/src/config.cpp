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

#include "sacon/config.hpp"

#include <fstream>
#include <set>

#include "sacon/errors.hpp"

namespace sacon {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::string_view section, const std::set<std::string>& known) {
  if (!j.is_object()) throw DataError("config: '" + std::string(section) + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw DataError("config: unknown key '" + key + "' in " + (section.empty() ? "top level" : std::string(section)));
    }
  }
}

std::filesystem::path resolve(const json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key)) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_relative() && !base.empty() ? base / p : p;
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "uniform") return SamplerKind::Uniform;
  if (s == "class_balanced") return SamplerKind::ClassBalanced;
  throw DataError("config: unknown sampler '" + s + "'");
}

}  // namespace

std::string_view to_string(Similarity s) { return s == Similarity::Cosine ? "cosine" : "neg_sq_euclidean"; }

Similarity similarity_from_string(std::string_view s) {
  if (s == "cosine") return Similarity::Cosine;
  if (s == "neg_sq_euclidean") return Similarity::NegativeSquaredEuclidean;
  throw DataError("unknown similarity '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  train.validate();
  if (encoder.max_seq_len < static_cast<int>(preprocess.max_seq_len)) {
    throw DataError("config: encoder.max_seq_len must be at least preprocess.max_seq_len");
  }
  if (!(preprocess.rho_blank >= 0.0 && preprocess.rho_blank <= 1.0) ||
      !(preprocess.mlm_rate >= 0.0 && preprocess.mlm_rate <= 1.0)) {
    throw DataError("config: preprocess rates must lie in [0, 1]");
  }
  if (preprocess.max_seq_len < 8) throw DataError("config: preprocess.max_seq_len must be at least 8");
  if (vocab_min_count == 0) throw DataError("config: vocab.min_count must be at least 1");
  if (eval.task.n < 2 || eval.task.k < 0 || eval.task.t < 1 || eval.task.episodes < 1) {
    throw DataError("config: eval needs n >= 2, k >= 0, t >= 1, episodes >= 1");
  }
}

json RunConfig::to_json() const {
  json enc = encoder.to_json();
  enc.erase("vocab_size");
  json j = {{"corpus", corpus.string()},
            {"labels", labels.string()},
            {"vocab", {{"min_count", vocab_min_count}}},
            {"encoder", enc},
            {"train", train.to_json()},
            {"preprocess",
             {{"rho_blank", preprocess.rho_blank},
              {"mlm_rate", preprocess.mlm_rate},
              {"max_seq_len", preprocess.max_seq_len},
              {"rng_seed", preprocess.rng_seed}}},
            {"eval",
             {{"corpus", eval.corpus.string()},
              {"n", eval.task.n},
              {"k", eval.task.k},
              {"t", eval.task.t},
              {"episodes", eval.task.episodes},
              {"seed", eval.seed},
              {"label_info", eval.label_info},
              {"similarity", std::string(to_string(eval.similarity))}}}};
  if (!background.empty()) j["background"] = background.string();
  return j;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base) {
  RunConfig c;
  try {
    reject_unknown(j, "", {"corpus", "labels", "background", "vocab", "encoder", "train", "preprocess", "eval"});
    c.corpus = resolve(j, "corpus", base);
    c.labels = resolve(j, "labels", base);
    c.background = resolve(j, "background", base);

    if (j.contains("vocab")) {
      const json& v = j.at("vocab");
      reject_unknown(v, "vocab", {"min_count"});
      c.vocab_min_count = v.value("min_count", c.vocab_min_count);
    }
    if (j.contains("encoder")) {
      const json& e = j.at("encoder");
      reject_unknown(e, "encoder", {"d_model", "n_layers", "n_heads", "ffn_dim", "max_seq_len", "init_std"});
      c.encoder.d_model = e.value("d_model", c.encoder.d_model);
      c.encoder.n_layers = e.value("n_layers", c.encoder.n_layers);
      c.encoder.n_heads = e.value("n_heads", c.encoder.n_heads);
      c.encoder.ffn_dim = e.value("ffn_dim", c.encoder.ffn_dim);
      c.encoder.max_seq_len = e.value("max_seq_len", c.encoder.max_seq_len);
      c.encoder.init_std = e.value("init_std", c.encoder.init_std);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, "train",
                     {"batch_size", "epochs", "warmup_epochs", "lr", "weight_decay", "beta1", "beta2", "eps",
                      "rng_seed", "objective_mode", "checkpoint_every", "eval_every", "max_steps", "sampler",
                      "normalize_label_positives", "shared_init"});
      TrainConfig& tc = c.train;
      tc.batch_size = t.value("batch_size", tc.batch_size);
      tc.epochs = t.value("epochs", tc.epochs);
      tc.warmup_epochs = t.value("warmup_epochs", tc.warmup_epochs);
      tc.lr = t.value("lr", tc.lr);
      tc.weight_decay = t.value("weight_decay", tc.weight_decay);
      tc.beta1 = t.value("beta1", tc.beta1);
      tc.beta2 = t.value("beta2", tc.beta2);
      tc.eps = t.value("eps", tc.eps);
      tc.rng_seed = t.value("rng_seed", tc.rng_seed);
      if (t.contains("objective_mode")) {
        tc.objective_mode = objective_mode_from_string(t.at("objective_mode").get<std::string>());
      }
      tc.checkpoint_every = t.value("checkpoint_every", tc.checkpoint_every);
      tc.eval_every = t.value("eval_every", tc.eval_every);
      tc.max_steps = t.value("max_steps", tc.max_steps);
      if (t.contains("sampler")) tc.sampler = sampler_from_string(t.at("sampler").get<std::string>());
      tc.normalize_label_positives = t.value("normalize_label_positives", tc.normalize_label_positives);
      tc.shared_init = t.value("shared_init", tc.shared_init);
    }
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      reject_unknown(p, "preprocess", {"rho_blank", "mlm_rate", "max_seq_len", "rng_seed"});
      c.preprocess.rho_blank = p.value("rho_blank", c.preprocess.rho_blank);
      c.preprocess.mlm_rate = p.value("mlm_rate", c.preprocess.mlm_rate);
      c.preprocess.max_seq_len = p.value("max_seq_len", c.preprocess.max_seq_len);
      c.preprocess.rng_seed = p.value("rng_seed", c.preprocess.rng_seed);
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      reject_unknown(e, "eval", {"corpus", "n", "k", "t", "episodes", "seed", "label_info", "similarity"});
      c.eval.corpus = resolve(e, "corpus", base);
      c.eval.task.n = e.value("n", c.eval.task.n);
      c.eval.task.k = e.value("k", c.eval.task.k);
      c.eval.task.t = e.value("t", c.eval.task.t);
      c.eval.task.episodes = e.value("episodes", c.eval.task.episodes);
      c.eval.seed = e.value("seed", c.eval.seed);
      c.eval.label_info = e.value("label_info", c.eval.label_info);
      if (e.contains("similarity")) c.eval.similarity = similarity_from_string(e.at("similarity").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("config: " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string default_config_text() { return RunConfig{}.to_json().dump(2); }

}  // namespace sacon

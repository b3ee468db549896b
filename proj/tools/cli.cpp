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

#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "sacon/checkpoint.hpp"
#include "sacon/config.hpp"
#include "sacon/errors.hpp"
#include "sacon/gradcheck.hpp"
#include "sacon/metrics.hpp"
#include "sacon/pipeline.hpp"
#include "sacon/synthetic.hpp"

namespace sacon::cli {

namespace {

void write_json(const nlohmann::json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << '\n';
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Run config pointing at the files write_synth produced.
nlohmann::json synth_run_config() {
  RunConfig c;
  c.corpus = "pretrain.jsonl";
  c.labels = "labels.json";
  c.background = "background.jsonl";
  c.eval.corpus = "heldout.jsonl";
  return c.to_json();
}

struct EvalInputs {
  LoadedModel loaded;
  PretrainingData data;
};

EvalInputs load_eval_inputs(const std::string& checkpoint, const std::filesystem::path& corpus,
                            const std::filesystem::path& labels) {
  LoadedModel loaded = load_model(read_checkpoint(checkpoint));
  const LabelDictionary dict = build_label_dictionary(read_label_records(labels));
  PretrainingData data = eval_data(loaded.vocab, dict, read_corpus(corpus), loaded.preprocess.max_seq_len);
  return {std::move(loaded), std::move(data)};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bi-encoder contrastive pre-training and few-shot relation extraction"};
  app.name("sacon");
  app.require_subcommand(1);
  app.footer("Run config (JSON) with every default:\n" + default_config_text() +
             "\n\nExit codes: 0 ok, 1 usage error, 2 data error, 3 numerical abort.");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic corpus, labels and a run config");
  std::string spec_path, gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--spec", spec_path, "Synthetic spec JSON (defaults when omitted)");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Overrides the spec's rng_seed");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pre-train both encoders");
  std::string pre_config, pre_out, pre_log;
  std::optional<std::uint64_t> pre_seed;
  pre->add_option("--config", pre_config, "Run config JSON")->required();
  pre->add_option("--out", pre_out, "Output directory (checkpoint.bin, vocab.json)")->required();
  pre->add_option("--seed", pre_seed, "Overrides train.rng_seed and preprocess.rng_seed");
  pre->add_option("--log", pre_log, "Training log path (default: <out>/train_log.jsonl)");

  // eval-fewshot / eval-zeroshot
  std::string ev_config, ev_ckpt, ev_out, ev_corpus, ev_sim;
  std::optional<int> ev_n, ev_k, ev_t, ev_episodes;
  std::optional<std::uint64_t> ev_seed;
  bool ev_label_info = false;
  auto* few = app.add_subcommand("eval-fewshot", "N-way-K-shot prototype evaluation");
  auto* zero = app.add_subcommand("eval-zeroshot", "N-way-0-shot evaluation by label matching");
  for (auto* sc : {few, zero}) {
    sc->add_option("--config", ev_config, "Run config JSON (labels, eval corpus, eval defaults)")->required();
    sc->add_option("--checkpoint", ev_ckpt, "Checkpoint written by pretrain")->required();
    sc->add_option("--corpus", ev_corpus, "Overrides eval.corpus");
    sc->add_option("--n", ev_n, "Classes per episode");
    sc->add_option("--t", ev_t, "Queries per episode");
    sc->add_option("--episodes", ev_episodes, "Number of episodes");
    sc->add_option("--seed", ev_seed, "Episode sampling seed");
    sc->add_option("--out", ev_out, "Report path (default: stdout)");
  }
  few->add_option("--k", ev_k, "Support instances per class");
  few->add_flag("--label-info", ev_label_info, "Add label embeddings to prototypes");
  few->add_option("--similarity", ev_sim, "cosine | neg_sq_euclidean");

  // metrics / export-embeddings
  std::string m_ckpt, m_corpus, m_labels, m_out, m_relations;
  std::uint64_t m_seed = 0;
  auto* met = app.add_subcommand("metrics", "Alignment and uniformity of a checkpoint on a corpus");
  auto* exp = app.add_subcommand("export-embeddings", "Normalised embeddings as CSV");
  for (auto* sc : {met, exp}) {
    sc->add_option("--checkpoint", m_ckpt, "Checkpoint written by pretrain")->required();
    sc->add_option("--corpus", m_corpus, "Corpus JSONL")->required();
    sc->add_option("--labels", m_labels, "Label JSON")->required();
    sc->add_option("--out", m_out, "Output path")->required();
  }
  met->add_option("--seed", m_seed, "Pair-sampling seed for sets above 500 embeddings");
  exp->add_option("--relations", m_relations, "Comma-separated relation ids")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and the full loss");
  std::uint64_t gc_seed = 0;
  int gc_cases = 100;
  gc->add_option("--seed", gc_seed, "Seed for random shapes and values");
  gc->add_option("--cases", gc_cases, "Random cases per op");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      SynthSpec spec;
      if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw DataError("cannot open spec " + spec_path);
        try {
          spec = SynthSpec::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
          throw DataError("spec " + spec_path + ": " + e.what());
        }
      }
      if (gen_seed) spec.rng_seed = *gen_seed;
      const SynthCorpus corpus = generate(spec);
      write_synth(corpus, gen_out);
      write_json(synth_run_config(), (std::filesystem::path(gen_out) / "run.json").string(), out);
      write_json(spec.to_json(), (std::filesystem::path(gen_out) / "spec.json").string(), out);
      out << "wrote " << corpus.sentences.size() << " sentences (" << corpus.pretrain_relations.size()
          << " pretraining, " << corpus.heldout_relations.size() << " held-out relations), "
          << corpus.background.size() << " background sentences and " << corpus.labels.size() << " labels to "
          << gen_out << '\n';
      return kOk;
    }

    if (*pre) {
      RunConfig cfg = RunConfig::load(pre_config);
      if (pre_seed) {
        cfg.train.rng_seed = *pre_seed;
        cfg.preprocess.rng_seed = *pre_seed;
      }
      const RunData data = RunData::load(cfg);
      PretrainSession session(cfg, data);
      std::optional<PretrainingData> eval;
      if (cfg.train.eval_every > 0 && !data.eval_corpus.empty()) {
        eval = eval_data(data.vocab, data.labels, data.eval_corpus, cfg.preprocess.max_seq_len);
      }
      const std::filesystem::path log = pre_log.empty() ? std::filesystem::path(pre_out) / "train_log.jsonl"
                                                        : std::filesystem::path(pre_log);
      out << "vocab " << data.vocab.size() << " tokens, " << session.data().instances.size()
          << " pretraining sentences, " << data.background.size() << " background sentences, "
          << session.trainer().total_steps() << " steps\n";
      const PretrainOutputs res = run_pretraining(session, pre_out, log, &out, eval ? &*eval : nullptr);
      out << "checkpoint " << res.checkpoint.string() << '\n';
      return kOk;
    }

    if (*few || *zero) {
      const RunConfig cfg = RunConfig::load(ev_config);
      const std::filesystem::path corpus = ev_corpus.empty() ? cfg.eval.corpus : std::filesystem::path(ev_corpus);
      if (corpus.empty()) throw DataError("no evaluation corpus: set eval.corpus or pass --corpus");
      const EvalInputs in = load_eval_inputs(ev_ckpt, corpus, cfg.labels);
      TaskSpec task = cfg.eval.task;
      if (ev_n) task.n = *ev_n;
      if (ev_k) task.k = *ev_k;
      if (ev_t) task.t = *ev_t;
      if (ev_episodes) task.episodes = *ev_episodes;
      const std::uint64_t seed = ev_seed.value_or(cfg.eval.seed);
      EvalReport report;
      if (*few) {
        const Similarity sim = ev_sim.empty() ? cfg.eval.similarity : similarity_from_string(ev_sim);
        report = evaluate_fewshot(in.loaded.model, in.data, task, seed, ev_label_info || cfg.eval.label_info, sim);
      } else {
        report = evaluate_zeroshot(in.loaded.model, in.data, task, seed);
      }
      if (!ev_out.empty()) {
        write_json(report.to_json(), ev_out, out);
        out << std::fixed << std::setprecision(4) << report.task.n << "-way-" << report.task.k
            << "-shot accuracy " << report.accuracy << " +/- " << report.ci95_half_width << '\n';
      } else {
        write_json(report.to_json(), "", out);
      }
      return kOk;
    }

    if (*met || *exp) {
      const EvalInputs in = load_eval_inputs(m_ckpt, m_corpus, m_labels);
      const CorpusEmbeddings e = embed_corpus(in.loaded.model, in.data);
      if (*met) {
        PairSampling sampling;
        sampling.seed = m_seed;
        write_json(compute_metrics(e, sampling).to_json(), m_out, out);
      } else {
        export_embeddings(e, split_commas(m_relations), m_out);
      }
      return kOk;
    }

    if (*gc) {
      bool ok = true;
      for (const auto& r : op_gradchecks(gc_seed, gc_cases)) {
        out << (r.passed ? "PASS " : "FAIL ") << r.to_json().dump() << '\n';
        ok = ok && r.passed;
      }
      const GradcheckResult full = model_gradcheck(gc_seed);
      out << (full.passed ? "PASS " : "FAIL ") << full.to_json().dump() << '\n';
      ok = ok && full.passed;
      return ok ? kOk : kNumerical;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace sacon::cli

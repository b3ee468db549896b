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

#include "sacon/pipeline.hpp"

#include <fstream>
#include <iomanip>

#include "sacon/errors.hpp"

namespace sacon {

RunData RunData::load(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw DataError("config: 'corpus' is required");
  if (cfg.labels.empty()) throw DataError("config: 'labels' is required");
  RunData r;
  r.labels = build_label_dictionary(read_label_records(cfg.labels));
  r.corpus = read_corpus(cfg.corpus);
  if (!cfg.background.empty()) r.background = read_corpus(cfg.background);
  if (!cfg.eval.corpus.empty()) r.eval_corpus = read_corpus(cfg.eval.corpus);

  std::vector<RawSentence> all = r.corpus;
  all.insert(all.end(), r.background.begin(), r.background.end());
  all.insert(all.end(), r.eval_corpus.begin(), r.eval_corpus.end());
  r.vocab = Vocab::build(vocab_corpus(all, r.labels), static_cast<int>(cfg.vocab_min_count));
  return r;
}

PretrainSession::PretrainSession(const RunConfig& cfg, const RunData& run)
    : cfg_(cfg), data_(PretrainingData::build(run.vocab, run.labels, run.corpus, cfg.preprocess.max_seq_len)) {
  cfg_.encoder.vocab_size = static_cast<int>(run.vocab.size());
  if (!run.background.empty()) {
    background_ = PretrainingData::build(run.vocab, run.labels, run.background, cfg.preprocess.max_seq_len);
  }
  BiEncoder model = BiEncoder::init(cfg_.encoder, cfg_.train.rng_seed, cfg_.train.shared_init);
  trainer_.emplace(std::move(model), data_, cfg_.train, cfg_.preprocess, background_ ? &*background_ : nullptr);
}

PretrainingData eval_data(const Vocab& vocab, const LabelDictionary& labels, const std::vector<RawSentence>& corpus,
                          std::size_t max_seq_len) {
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  return PretrainingData::build(vocab, labels, corpus, max_seq_len);
}

EvalReport evaluate_fewshot(const BiEncoder& model, const PretrainingData& eval, const TaskSpec& task,
                            std::uint64_t seed, bool label_info, Similarity sim) {
  const CorpusEmbeddings e = embed_corpus(model, eval);
  std::vector<std::string> relations;
  for (const auto& inst : eval.instances) relations.push_back(inst.relation_id);
  const EpisodeDataset dataset = EpisodeDataset::from_relations(relations);
  std::string name = label_info ? "prototype+label" : "prototype";
  if (sim != Similarity::Cosine) name += "/" + std::string(to_string(sim));
  return evaluate(dataset, task, seed, fewshot_predictor(e.sentences, e.labels, label_info, sim), name);
}

EvalReport evaluate_zeroshot(const BiEncoder& model, const PretrainingData& eval, TaskSpec task, std::uint64_t seed) {
  task.k = 0;
  const CorpusEmbeddings e = embed_corpus(model, eval);
  std::vector<std::string> relations;
  for (const auto& inst : eval.instances) relations.push_back(inst.relation_id);
  const EpisodeDataset dataset = EpisodeDataset::from_relations(relations);
  return evaluate(dataset, task, seed, zeroshot_predictor(e.sentences, e.labels), "label-matching");
}

PretrainOutputs run_pretraining(PretrainSession& session, const std::filesystem::path& out_dir,
                                const std::filesystem::path& log_path, std::ostream* progress,
                                const PretrainingData* eval) {
  std::filesystem::create_directories(out_dir);
  Trainer& trainer = session.trainer();
  const TrainConfig& tc = session.config().train;
  std::ofstream log;
  if (!log_path.empty()) {
    if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
    log.open(log_path);
    if (!log) throw DataError("cannot write training log " + log_path.string());
  }
  session.data().vocab.save(out_dir / "vocab.json");

  PretrainOutputs out;
  const std::int64_t total = trainer.total_steps();
  const std::int64_t report_every = std::max<std::int64_t>(1, total / 20);
  while (!trainer.done()) {
    const TrainLogRecord rec = trainer.step();
    out.log.push_back(rec);
    if (log) log << rec.to_json().dump() << '\n';
    if (progress != nullptr && (rec.step % report_every == 0 || rec.step == total)) {
      *progress << std::fixed << std::setprecision(4) << "step " << rec.step << "/" << total << " "
                << to_string(rec.phase) << " epoch " << rec.epoch << " scl " << rec.scl << " mlm " << rec.mlm
                << " total " << rec.total << " tau " << rec.tau << '\n';
    }
    if (tc.checkpoint_every > 0 && rec.step % tc.checkpoint_every == 0) {
      write_checkpoint(out_dir / ("checkpoint-" + std::to_string(rec.step) + ".bin"), trainer.to_checkpoint());
    }
    if (eval != nullptr && tc.eval_every > 0 && rec.step % tc.eval_every == 0 && progress != nullptr) {
      const EvalConfig& ec = session.config().eval;
      TaskSpec quick = ec.task;
      quick.episodes = std::min(quick.episodes, 200);
      const EvalReport r = evaluate_fewshot(trainer.model(), *eval, quick, ec.seed, ec.label_info, ec.similarity);
      *progress << "eval step " << rec.step << " " << quick.n << "-way-" << quick.k << "-shot accuracy "
                << r.accuracy << '\n';
    }
  }
  out.checkpoint = out_dir / "checkpoint.bin";
  write_checkpoint(out.checkpoint, trainer.to_checkpoint());
  return out;
}

}  // namespace sacon

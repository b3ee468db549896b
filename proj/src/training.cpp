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

#include "sacon/training.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "sacon/errors.hpp"

namespace sacon {

namespace {

// Stream tags for Rng::derive.
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kEpochStream = 12;
constexpr std::uint64_t kSentenceMaskStream = 13;
constexpr std::uint64_t kLabelMaskStream = 14;
constexpr std::uint64_t kWarmupOffset = 100;  // added to the three tags above

std::uint64_t stream(std::uint64_t tag, Phase phase) {
  return phase == Phase::Warmup ? tag + kWarmupOffset : tag;
}

std::string_view sampler_name(SamplerKind s) { return s == SamplerKind::Uniform ? "uniform" : "class_balanced"; }

nlohmann::json preprocess_json(const PreprocessConfig& p) {
  return {{"rho_blank", p.rho_blank}, {"mlm_rate", p.mlm_rate}, {"max_seq_len", p.max_seq_len},
          {"rng_seed", p.rng_seed}};
}

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << "(" << m.rows() << "x" << m.cols() << ")";
  return os.str();
}

void assign_from(std::vector<NamedTensor>& params, const Checkpoint& ckpt) {
  for (auto& p : params) {
    const Matrix& stored = ckpt.at(p.name);
    if (stored.rows() != p.tensor.rows() || stored.cols() != p.tensor.cols()) {
      throw DataError("checkpoint tensor '" + p.name + "' has shape " + shape_of(stored) + ", model expects " +
                      shape_of(p.tensor.value()));
    }
    p.tensor.mutable_value() = stored;
  }
}

}  // namespace

std::string_view to_string(Phase p) { return p == Phase::Warmup ? "warmup" : "contrastive"; }

void TrainConfig::validate() const {
  if (batch_size == 0) throw DataError("train.batch_size must be positive");
  if (batch_size < 2) throw DataError("train.batch_size must be at least 2 for contrastive training");
  if (epochs < 0 || warmup_epochs < 0) throw DataError("train.epochs and train.warmup_epochs must be non-negative");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw DataError("train.lr and train.weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DataError("train.beta1/beta2 must lie in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"warmup_epochs", warmup_epochs},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"rng_seed", rng_seed},
          {"objective_mode", std::string(to_string(objective_mode))},
          {"checkpoint_every", checkpoint_every},
          {"eval_every", eval_every},
          {"max_steps", max_steps},
          {"sampler", std::string(sampler_name(sampler))},
          {"normalize_label_positives", normalize_label_positives},
          {"shared_init", shared_init}};
}

BiEncoder BiEncoder::init(const EncoderConfig& config, std::uint64_t seed, bool shared_init) {
  BiEncoder m;
  Rng label_rng = Rng::derive(seed, {kInitStream, 0});
  m.label_encoder = EncoderParams::init(config, label_rng);
  if (shared_init) {
    m.sentence_encoder = m.label_encoder.clone();
  } else {
    Rng sentence_rng = Rng::derive(seed, {kInitStream, 1});
    m.sentence_encoder = EncoderParams::init(config, sentence_rng);
  }
  return m;
}

std::vector<NamedTensor> BiEncoder::named_parameters() const {
  auto out = label_encoder.named_parameters("label_encoder");
  auto s = sentence_encoder.named_parameters("sentence_encoder");
  out.insert(out.end(), s.begin(), s.end());
  out.push_back({"temperature", temperature.value});
  return out;
}

PretrainingData PretrainingData::build(Vocab vocab, LabelDictionary labels, const std::vector<RawSentence>& sentences,
                                       std::size_t max_seq_len) {
  check_label_totality(sentences, labels);
  PretrainingData d;
  d.vocab = std::move(vocab);
  d.labels = std::move(labels);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    d.instances.push_back(to_instance(sentences[i], d.vocab));
    d.marked.push_back(insert_entity_markers(d.instances.back(), max_seq_len, "sentence " + std::to_string(i)));
  }
  for (const auto& e : d.labels.entries()) d.label_tokens[e.relation_id] = label_sequence(e, d.vocab, max_seq_len);
  return d;
}

std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<SentenceInstance>& instances,
                                                    const TrainConfig& cfg, std::int64_t epoch, Phase phase) {
  Rng rng = Rng::derive(cfg.rng_seed, {stream(kEpochStream, phase), static_cast<std::uint64_t>(epoch)});
  std::vector<std::size_t> order;
  order.reserve(instances.size());
  if (cfg.sampler == SamplerKind::Uniform) {
    for (std::size_t i = 0; i < instances.size(); ++i) order.push_back(i);
    rng.shuffle(std::span<std::size_t>(order));
  } else {
    // Round-robin over shuffled per-relation queues so each batch spans as
    // many relations as possible.
    std::vector<std::vector<std::size_t>> groups;
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      auto [it, inserted] = group_of.emplace(instances[i].relation_id, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    for (auto& g : groups) rng.shuffle(std::span<std::size_t>(g));
    rng.shuffle(std::span<std::vector<std::size_t>>(groups));
    for (std::size_t round = 0; order.size() < instances.size(); ++round) {
      for (const auto& g : groups) {
        if (round < g.size()) order.push_back(g[round]);
      }
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch prepare_batch(const PretrainingData& data, const PreprocessConfig& pre, std::int64_t epoch,
                    std::size_t index_in_epoch, std::vector<std::size_t> sentence_ids, Phase phase) {
  Batch b;
  b.phase = phase;
  b.epoch = epoch;
  b.index_in_epoch = index_in_epoch;
  b.sentence_ids = std::move(sentence_ids);
  std::vector<std::string> relations;
  for (auto sid : b.sentence_ids) {
    Rng rng = Rng::derive(pre.rng_seed, {stream(kSentenceMaskStream, phase), static_cast<std::uint64_t>(epoch), sid});
    const MarkedSequence blanked = apply_blank_masking(data.marked.at(sid), pre.rho_blank, rng);
    MlmMasked masked = apply_mlm_masking(blanked.tokens, pre.mlm_rate, rng);
    b.sentences.push_back({std::move(masked.tokens), blanked.pos_e1s, blanked.pos_e2s, std::move(masked.targets)});
    relations.push_back(data.instances[sid].relation_id);
  }
  b.pairing = PairingIndex::from_relations(relations);
  for (std::size_t r = 0; r < b.pairing.m(); ++r) {
    Rng rng = Rng::derive(pre.rng_seed, {stream(kLabelMaskStream, phase), static_cast<std::uint64_t>(epoch), index_in_epoch, r});
    MlmMasked masked = apply_mlm_masking(data.label_tokens.at(b.pairing.label_ids[r]), pre.mlm_rate, rng);
    b.labels.push_back({std::move(masked.tokens), std::move(masked.targets)});
  }
  return b;
}

std::vector<Batch> make_batches(const PretrainingData& data, const TrainConfig& cfg, const PreprocessConfig& pre,
                                std::int64_t epoch, Phase phase) {
  std::vector<Batch> out;
  auto plan = epoch_batches(data.instances, cfg, epoch, phase);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    out.push_back(prepare_batch(data, pre, epoch, i, std::move(plan[i]), phase));
  }
  return out;
}

nlohmann::json TrainLogRecord::to_json() const {
  nlohmann::ordered_json j;
  j["phase"] = std::string(to_string(phase));
  j["step"] = step;
  j["epoch"] = epoch;
  j["scl_s"] = scl_s;
  j["scl_l"] = scl_l;
  j["scl"] = scl;
  j["mlm_s"] = mlm_s;
  j["mlm_l"] = mlm_l;
  j["mlm"] = mlm;
  j["total"] = total;
  j["tau"] = tau;
  j["wall_ms"] = wall_ms;
  return nlohmann::json::parse(j.dump());
}

bool TrainLogRecord::same_values(const TrainLogRecord& o) const {
  return phase == o.phase && step == o.step && epoch == o.epoch && scl_s == o.scl_s && scl_l == o.scl_l && scl == o.scl &&
         mlm_s == o.mlm_s && mlm_l == o.mlm_l && mlm == o.mlm && total == o.total && tau == o.tau;
}

StepLosses compute_losses(const BiEncoder& model, const Batch& batch, const TrainConfig& cfg) {
  std::vector<Tensor> sentence_embs, sentence_rows, label_embs, label_rows;
  std::vector<int> sentence_targets, label_targets;

  auto collect = [](const HiddenStates& h, const std::vector<MlmTarget>& targets, std::vector<Tensor>& rows,
                    std::vector<int>& ids) {
    if (targets.empty()) return;
    std::vector<Index> positions;
    for (const auto& t : targets) {
      positions.push_back(static_cast<Index>(t.position));
      ids.push_back(t.original);
    }
    rows.push_back(select_rows(h.states, positions));
  };

  for (const auto& s : batch.sentences) {
    HiddenStates h = encode(model.sentence_encoder, std::span<const int>(s.tokens));
    h.pos_e1s = s.pos_e1s;
    h.pos_e2s = s.pos_e2s;
    sentence_embs.push_back(pool_sentence(h));
    collect(h, s.targets, sentence_rows, sentence_targets);
  }
  // With shared_init the warm-up trains a single base encoder on both kinds
  // of text; it is copied into the label tower when the phase ends.
  const EncoderParams& label_tower =
      batch.phase == Phase::Warmup && cfg.shared_init ? model.sentence_encoder : model.label_encoder;
  for (const auto& l : batch.labels) {
    const HiddenStates h = encode(label_tower, std::span<const int>(l.tokens));
    label_embs.push_back(pool_label(h));
    collect(h, l.targets, label_rows, label_targets);
  }

  const Tensor cosine = cosine_similarity_matrix(concat_rows(sentence_embs), concat_rows(label_embs));
  const Tensor& tau = model.temperature.value;
  StepLosses out;
  out.scl_s = scl_sentence_loss(cosine, batch.pairing, tau);
  out.scl_l = scl_label_loss(cosine, batch.pairing, tau, cfg.normalize_label_positives);
  out.mlm_s = sentence_rows.empty()
                  ? Tensor::scalar(0.0)
                  : cross_entropy(mlm_logits(model.sentence_encoder, concat_rows(sentence_rows)), sentence_targets);
  out.mlm_l = label_rows.empty()
                  ? Tensor::scalar(0.0)
                  : cross_entropy(mlm_logits(label_tower, concat_rows(label_rows)), label_targets);
  out.total = batch.phase == Phase::Warmup ? out.mlm_s + out.mlm_l
                                           : objective(cfg.objective_mode, out.scl_s, out.scl_l, out.mlm_s + out.mlm_l);
  return out;
}

Trainer::Trainer(BiEncoder model, const PretrainingData& data, TrainConfig train, PreprocessConfig pre,
                 const PretrainingData* background)
    : model_(std::move(model)), data_(&data), background_(background), train_(train), pre_(pre) {
  train_.validate();
  if (data.instances.empty()) throw DataError("trainer: corpus is empty");
  if (background_ != nullptr && background_->instances.empty()) throw DataError("trainer: background corpus is empty");
  if (data.instances.size() < train_.batch_size) {
    std::cerr << "warning: corpus has " << data.instances.size() << " sentences, fewer than batch_size "
              << train_.batch_size << "; each epoch is a single smaller batch\n";
  }
  params_ = model_.named_parameters();
  opt_ = OptimizerState::for_params(params_, train_.adamw());
  // Warm-up touches only the encoders it trains; the temperature and, with
  // shared_init, the label tower sit out (no decay either).
  for (const auto& p : params_) {
    const bool sentence = p.name.rfind("sentence_encoder.", 0) == 0;
    const bool label = p.name.rfind("label_encoder.", 0) == 0;
    warmup_active_.push_back(sentence || (label && !train_.shared_init));
  }
}

std::size_t Trainer::steps_per_epoch() const {
  return (data_->instances.size() + train_.batch_size - 1) / train_.batch_size;
}

std::size_t Trainer::warmup_steps_per_epoch() const {
  if (background_ == nullptr) return 0;
  return (background_->instances.size() + train_.batch_size - 1) / train_.batch_size;
}

std::int64_t Trainer::warmup_steps() const {
  return static_cast<std::int64_t>(warmup_steps_per_epoch()) * train_.warmup_epochs;
}

std::int64_t Trainer::total_steps() const {
  if (train_.max_steps > 0) return train_.max_steps;
  return warmup_steps() + static_cast<std::int64_t>(steps_per_epoch()) * train_.epochs;
}

void Trainer::finish_warmup() {
  if (train_.shared_init) {
    auto from = model_.sentence_encoder.named_parameters("");
    auto to = model_.label_encoder.named_parameters("");
    for (std::size_t i = 0; i < from.size(); ++i) to[i].tensor.mutable_value() = from[i].tensor.value();
  }
  opt_ = OptimizerState::for_params(params_, train_.adamw());
}

TrainLogRecord Trainer::step() {
  if (step_ > 0 && step_ == warmup_steps()) finish_warmup();
  const bool warm = step_ < warmup_steps();
  const Phase phase = warm ? Phase::Warmup : Phase::Contrastive;
  const PretrainingData& data = warm ? *background_ : *data_;
  const auto spe = static_cast<std::int64_t>(warm ? warmup_steps_per_epoch() : steps_per_epoch());
  const std::int64_t local = warm ? step_ : step_ - warmup_steps();
  const std::int64_t epoch = local / spe;
  const auto index = static_cast<std::size_t>(local % spe);
  if (epoch != cached_epoch_ || phase != cached_phase_) {
    cached_plan_ = epoch_batches(data.instances, train_, epoch, phase);
    cached_epoch_ = epoch;
    cached_phase_ = phase;
  }
  return pretrain_step(prepare_batch(data, pre_, epoch, index, cached_plan_.at(index), phase));
}

TrainLogRecord Trainer::pretrain_step(const Batch& batch) {
  const auto start = std::chrono::steady_clock::now();
  const StepLosses losses = compute_losses(model_, batch, train_);
  const double total = losses.total.item();
  if (!std::isfinite(total)) {
    throw NumericalError("non-finite loss in batch " + std::to_string(batch.index_in_epoch) + " of epoch " +
                         std::to_string(batch.epoch));
  }
  zero_grad(params_);
  losses.total.backward();
  if (batch.phase == Phase::Warmup) {
    adamw_step(params_, opt_, warmup_active_);
  } else {
    adamw_step(params_, opt_);
  }
  model_.temperature.clamp();
  ++step_;

  TrainLogRecord rec;
  rec.phase = batch.phase;
  rec.step = step_;
  rec.epoch = batch.epoch;
  rec.scl_s = losses.scl_s.item();
  rec.scl_l = losses.scl_l.item();
  rec.scl = rec.scl_s + rec.scl_l;
  rec.mlm_s = losses.mlm_s.item();
  rec.mlm_l = losses.mlm_l.item();
  rec.mlm = rec.mlm_s + rec.mlm_l;
  rec.total = total;
  rec.tau = model_.temperature.get();
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "sacon-trainer"},
               {"step", step_},
               {"optimizer_step", opt_.step},
               {"encoder", model_.label_encoder.config.to_json()},
               {"preprocess", preprocess_json(pre_)},
               {"train", train_.to_json()},
               {"vocab", data_->vocab.to_json()}};
  for (const auto& p : params_) ckpt.tensors.push_back({p.name, p.tensor.value()});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ckpt.tensors.push_back({"optimizer.first_moment." + params_[i].name, opt_.first_moment[i]});
    ckpt.tensors.push_back({"optimizer.second_moment." + params_[i].name, opt_.second_moment[i]});
  }
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "sacon-trainer") throw DataError("checkpoint: not a trainer checkpoint");
  assign_from(params_, ckpt);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto* moments : {&opt_.first_moment, &opt_.second_moment}) {
      const std::string name = std::string(moments == &opt_.first_moment ? "optimizer.first_moment."
                                                                         : "optimizer.second_moment.") +
                               params_[i].name;
      const Matrix& stored = ckpt.at(name);
      if (stored.rows() != (*moments)[i].rows() || stored.cols() != (*moments)[i].cols()) {
        throw DataError("checkpoint tensor '" + name + "' has shape " + shape_of(stored) + ", model expects " +
                        shape_of((*moments)[i]));
      }
      (*moments)[i] = stored;
    }
  }
  try {
    step_ = ckpt.meta.at("step").get<std::int64_t>();
    opt_.step = ckpt.meta.at("optimizer_step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: missing trainer position: ") + e.what());
  }
  cached_epoch_ = -1;
}

LoadedModel load_model(const Checkpoint& ckpt) {
  LoadedModel out;
  try {
    const EncoderConfig enc = EncoderConfig::from_json(ckpt.meta.at("encoder"));
    out.vocab = Vocab::from_json(ckpt.meta.at("vocab"));
    const auto& p = ckpt.meta.at("preprocess");
    out.preprocess.rho_blank = p.at("rho_blank").get<double>();
    out.preprocess.mlm_rate = p.at("mlm_rate").get<double>();
    out.preprocess.max_seq_len = p.at("max_seq_len").get<std::size_t>();
    out.preprocess.rng_seed = p.at("rng_seed").get<std::uint64_t>();
    if (enc.vocab_size != out.vocab.size()) {
      throw DataError("checkpoint: encoder vocab_size " + std::to_string(enc.vocab_size) + " but vocab has " +
                      std::to_string(out.vocab.size()) + " entries");
    }
    out.model = BiEncoder::init(enc, 0, false);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed metadata: ") + e.what());
  }
  auto params = out.model.named_parameters();
  assign_from(params, ckpt);
  return out;
}

}  // namespace sacon

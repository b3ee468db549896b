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

#include "sacon/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sacon/rng.hpp"
#include "sacon/synthetic.hpp"
#include "sacon/training.hpp"

namespace sacon {

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = 0.0, double hi = 0.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = hi > lo ? lo + (hi - lo) * rng.uniform() : rng.normal();
  }
  return m;
}

Index dim(Rng& rng, Index lo = 1, Index hi = 4) {
  return lo + static_cast<Index>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

struct OpCase {
  std::vector<Tensor> leaves;
  std::function<Tensor()> build;
};

using CaseMaker = std::function<OpCase(Rng&)>;

/// Max relative error over every entry of every leaf for one case.
std::pair<double, std::size_t> check_case(const OpCase& c, Rng& rng, double h, double floor) {
  const Tensor probe = c.build();
  const Tensor weights = Tensor::constant(random_matrix(probe.rows(), probe.cols(), rng));
  auto f = [&] {
    NoGradGuard guard;
    return sum(mul(c.build(), weights)).item();
  };
  for (const auto& l : c.leaves) Tensor(l).zero_grad();
  sum(mul(c.build(), weights)).backward();

  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& leaf : c.leaves) {
    Tensor l = leaf;
    const Matrix analytic = l.grad();
    for (Index i = 0; i < l.rows(); ++i) {
      for (Index j = 0; j < l.cols(); ++j) {
        const double numeric = central_difference(f, l, i, j, h);
        worst = std::max(worst, relative_error(analytic(i, j), numeric, floor));
        ++checked;
      }
    }
  }
  return {worst, checked};
}

std::vector<std::pair<std::string, CaseMaker>> op_suite() {
  auto p = [](Matrix m) { return Tensor::parameter(std::move(m)); };
  std::vector<std::pair<std::string, CaseMaker>> s;
  s.emplace_back("matmul", [p](Rng& r) {
    const Index a = dim(r), b = dim(r), c = dim(r);
    Tensor x = p(random_matrix(a, b, r)), y = p(random_matrix(b, c, r));
    return OpCase{{x, y}, [=] { return matmul(x, y); }};
  });
  s.emplace_back("transpose", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return transpose(x); }};
  });
  s.emplace_back("add_broadcast_row", [p](Rng& r) {
    const Index a = dim(r), b = dim(r);
    Tensor x = p(random_matrix(a, b, r)), y = p(random_matrix(1, b, r));
    return OpCase{{x, y}, [=] { return add(x, y); }};
  });
  s.emplace_back("sub_broadcast_scalar", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r)), y = p(random_matrix(1, 1, r));
    return OpCase{{x, y}, [=] { return sub(x, y); }};
  });
  s.emplace_back("mul", [p](Rng& r) {
    const Index a = dim(r), b = dim(r);
    Tensor x = p(random_matrix(a, b, r)), y = p(random_matrix(a, b, r));
    return OpCase{{x, y}, [=] { return mul(x, y); }};
  });
  s.emplace_back("div_scalar", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r)), y = p(random_matrix(1, 1, r, 0.5, 2.0));
    return OpCase{{x, y}, [=] { return div_scalar(x, y); }};
  });
  s.emplace_back("scale_neg", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    const double k = r.normal();
    return OpCase{{x}, [=] { return neg(scale(x, k)); }};
  });
  s.emplace_back("exp", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return exp(x); }};
  });
  s.emplace_back("log", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r, 0.5, 2.0));
    return OpCase{{x}, [=] { return log(x); }};
  });
  s.emplace_back("gelu", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return gelu(x); }};
  });
  s.emplace_back("sum_mean", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return add(sum(x), scale(mean(x), 3.0)); }};
  });
  s.emplace_back("mean_axis", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return add(transpose(mean(x, Axis::Cols)), sum(mean(x, Axis::Rows))); }};
  });
  s.emplace_back("concat", [p](Rng& r) {
    const Index a = dim(r), b = dim(r);
    Tensor x = p(random_matrix(a, b, r)), y = p(random_matrix(a, dim(r), r)), z = p(random_matrix(dim(r), b, r));
    return OpCase{{x, y, z}, [=] { return concat_rows({slice_cols(concat_cols({x, y}), 0, b), z}); }};
  });
  s.emplace_back("slice_cols", [p](Rng& r) {
    const Index c = dim(r, 2, 5);
    Tensor x = p(random_matrix(dim(r), c, r));
    const Index start = static_cast<Index>(r.index(static_cast<std::size_t>(c)));
    const Index count = 1 + static_cast<Index>(r.index(static_cast<std::size_t>(c - start)));
    return OpCase{{x}, [=] { return slice_cols(x, start, count); }};
  });
  s.emplace_back("select_rows_gather", [p](Rng& r) {
    const Index a = dim(r), b = dim(r);
    Tensor x = p(random_matrix(a, b, r));
    std::vector<Index> rows;
    std::vector<std::pair<Index, Index>> entries;
    for (int k = 0; k < 5; ++k) {
      rows.push_back(static_cast<Index>(r.index(static_cast<std::size_t>(a))));
      entries.emplace_back(static_cast<Index>(r.index(static_cast<std::size_t>(a))),
                           static_cast<Index>(r.index(static_cast<std::size_t>(b))));
    }
    return OpCase{{x}, [=] { return add(sum(select_rows(x, rows)), sum(gather(x, entries))); }};
  });
  s.emplace_back("softmax_rows", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return softmax_rows(x); }};
  });
  s.emplace_back("log_softmax_rows", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r), r));
    return OpCase{{x}, [=] { return log_softmax_rows(x); }};
  });
  s.emplace_back("layer_norm", [p](Rng& r) {
    // Rows of 3+ entries keep the row variance away from the eps regime,
    // where the curvature swamps a 1e-5 step.
    const Index a = dim(r), b = dim(r, 3, 6);
    Tensor x = p(random_matrix(a, b, r)), g = p(random_matrix(1, b, r)), bb = p(random_matrix(1, b, r));
    return OpCase{{x, g, bb}, [=] { return layer_norm(x, g, bb); }};
  });
  s.emplace_back("normalize_rows", [p](Rng& r) {
    Tensor x = p(random_matrix(dim(r), dim(r, 2, 5), r));
    return OpCase{{x}, [=] { return normalize_rows(x); }};
  });
  s.emplace_back("embedding", [p](Rng& r) {
    const Index v = dim(r, 2, 6);
    Tensor table = p(random_matrix(v, dim(r), r));
    std::vector<int> ids;
    for (int k = 0; k < 6; ++k) ids.push_back(static_cast<int>(r.index(static_cast<std::size_t>(v))));
    return OpCase{{table}, [=] { return embedding(table, ids); }};
  });
  s.emplace_back("cross_entropy", [p](Rng& r) {
    const Index a = dim(r), c = dim(r, 2, 6);
    Tensor x = p(random_matrix(a, c, r));
    std::vector<int> targets;
    for (Index i = 0; i < a; ++i) targets.push_back(static_cast<int>(r.index(static_cast<std::size_t>(c))));
    return OpCase{{x}, [=] { return cross_entropy(x, targets); }};
  });
  return s;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double central_difference(const std::function<double()>& f, Tensor& leaf, Index r, Index c, double h) {
  double& x = leaf.mutable_value()(r, c);
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

nlohmann::json GradcheckResult::to_json() const {
  return {{"name", name},
          {"checked", checked},
          {"max_rel_error", max_rel_error},
          {"tolerance", tolerance},
          {"passed", passed}};
}

std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, int cases, double tolerance, double h,
                                           double floor) {
  std::vector<GradcheckResult> out;
  std::uint64_t op_index = 0;
  for (const auto& [name, make] : op_suite()) {
    GradcheckResult res{name, 0, 0.0, tolerance, false};
    for (int c = 0; c < cases; ++c) {
      Rng rng = Rng::derive(seed, {op_index, static_cast<std::uint64_t>(c)});
      const OpCase oc = make(rng);
      const auto [worst, checked] = check_case(oc, rng, h, floor);
      res.max_rel_error = std::max(res.max_rel_error, worst);
      res.checked += checked;
    }
    res.passed = res.max_rel_error < tolerance;
    out.push_back(res);
    ++op_index;
  }
  return out;
}

GradcheckResult model_gradcheck(std::uint64_t seed, const ModelGradcheckSpec& spec) {
  SynthSpec synth;
  synth.n_relations = 4;
  synth.instances_per_relation = 3;
  synth.vocab_size = 60;
  synth.relation_signal = 2;
  synth.noise_tokens = 3;
  synth.heldout_relations = 0;
  synth.background_per_relation = 0;
  synth.rng_seed = seed;
  const SynthCorpus corpus = generate(synth);
  const LabelDictionary labels = build_label_dictionary(corpus.labels);
  Vocab vocab = Vocab::build(vocab_corpus(corpus.sentences, labels), 1);

  PreprocessConfig pre;
  pre.max_seq_len = 24;
  pre.rng_seed = seed;
  const PretrainingData data = PretrainingData::build(vocab, labels, corpus.sentences, pre.max_seq_len);

  EncoderConfig enc;
  enc.vocab_size = static_cast<int>(data.vocab.size());
  enc.d_model = spec.d_model;
  enc.n_layers = spec.n_layers;
  enc.n_heads = 2;
  enc.ffn_dim = 2 * spec.d_model;
  enc.max_seq_len = static_cast<int>(pre.max_seq_len);
  enc.init_std = 0.5;
  BiEncoder model = BiEncoder::init(enc, seed, false);

  TrainConfig tc;
  tc.batch_size = static_cast<std::size_t>(spec.batch);
  tc.rng_seed = seed;
  std::vector<std::size_t> ids = epoch_batches(data.instances, tc, 0).front();
  const Batch batch = prepare_batch(data, pre, 0, 0, ids);

  auto params = model.named_parameters();
  for (auto& p : params) p.tensor.zero_grad();
  compute_losses(model, batch, tc).total.backward();
  auto f = [&] {
    NoGradGuard guard;
    return compute_losses(model, batch, tc).total.item();
  };

  GradcheckResult res{"full_loss", 0, 0.0, spec.tolerance, false};
  Rng rng = Rng::derive(seed, {99});
  for (int k = 0; k < spec.coordinates; ++k) {
    Tensor t = params[rng.index(params.size())].tensor;
    const auto r = static_cast<Index>(rng.index(static_cast<std::size_t>(t.rows())));
    const auto c = static_cast<Index>(rng.index(static_cast<std::size_t>(t.cols())));
    const double analytic = t.grad()(r, c);
    const double numeric = central_difference(f, t, r, c, spec.h);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric, spec.floor));
    ++res.checked;
  }
  res.passed = res.max_rel_error < spec.tolerance;
  return res;
}

}  // namespace sacon

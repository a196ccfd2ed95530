#include "seqlabel/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "seqlabel/errors.hpp"
#include "seqlabel/losses.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel {

nnet::TrainConfig base_stage_defaults() {
  nnet::TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.weight_decay = 1e-4;
  cfg.dropout_rate = 0.8;
  cfg.batch_size = 4;
  cfg.patience = 20;
  cfg.max_epochs = 500;
  return cfg;
}

nnet::TrainConfig seq_stage_defaults() {
  nnet::TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.weight_decay = 1e-3;
  cfg.dropout_rate = 0.1;
  cfg.batch_size = 16;
  cfg.patience = 20;
  cfg.max_epochs = 500;
  return cfg;
}

SplitDataset make_split_dataset(const DatasetSplit& split, double unsupervised_ratio,
                                std::uint64_t seed) {
  SupervisionSplit cut = split_supervision(split.train, unsupervised_ratio, seed);
  SplitDataset out;
  out.train_supervised = std::move(cut.supervised);
  out.train_unsupervised.reserve(cut.unsupervised.size());
  for (Row& row : cut.unsupervised.rows) out.train_unsupervised.push_back(std::move(row.features));
  out.validation = split.validation;
  out.test = split.test;
  out.unsupervised_ratio = unsupervised_ratio;
  return out;
}

std::string history_to_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream out;
  out << "stage,epoch,train_loss,valid_loss\n";
  for (const HistoryRow& row : history) {
    out << row.stage << ',' << row.record.epoch << ',' << text::format_double(row.record.train_loss)
        << ',' << text::format_double(row.record.valid_loss) << '\n';
  }
  return out.str();
}

namespace {

class BaseObjective final : public nnet::Objective {
 public:
  BaseObjective(const TabularDataset& train, const TabularDataset& valid)
      : train_(train), valid_(valid) {}

  std::size_t train_size() const override { return train_.size(); }

  double batch_loss(const nnet::DenseNet& net, std::span<const std::size_t> batch,
                    const nnet::DropoutSpec& dropout, nnet::Gradients& grads) override {
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (std::size_t idx : batch) {
      const Row& row = train_.rows[idx];
      const nnet::ForwardTrace trace = nnet::forward_trace(net, row.features, dropout);
      const BceResult bce = base_bce_loss(trace.output, row.labels);
      total += bce.loss;
      nnet::accumulate_backward(net, trace, bce.grad, grads, inv);
    }
    return total * inv;
  }

  double validation_loss(const nnet::DenseNet& net) override {
    if (valid_.rows.empty()) return 0.0;
    double total = 0.0;
    for (const Row& row : valid_.rows) {
      total += base_bce_loss(nnet::forward(net, row.features), row.labels).loss;
    }
    return total / static_cast<double>(valid_.size());
  }

 private:
  const TabularDataset& train_;
  const TabularDataset& valid_;
};

struct UnsupervisedTerm {
  const std::vector<std::vector<double>>* contexts = nullptr;
  const ConstraintSet* constraints = nullptr;
  double weight = 0.0;
  std::size_t beam_width = 5;
};

// Supervised NLL over labeled examples; optionally lambda * L_cons over
// unsupervised contexts, indexed after the labeled ones.
class SequenceObjective final : public nnet::Objective {
 public:
  SequenceObjective(const std::vector<SeqExample>& train, const std::vector<SeqExample>& valid,
                    std::size_t n_labels, UnsupervisedTerm unsup = {})
      : train_(train), valid_(valid), n_(n_labels), unsup_(unsup) {}

  std::size_t train_size() const override {
    return train_.size() + (unsup_.contexts ? unsup_.contexts->size() : 0);
  }

  double batch_loss(const nnet::DenseNet& net, std::span<const std::size_t> batch,
                    const nnet::DropoutSpec& dropout, nnet::Gradients& grads) override {
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (std::size_t idx : batch) {
      if (idx < train_.size()) {
        const SeqExample& ex = train_[idx];
        const std::vector<double> ones(n_, 1.0);
        total -= weighted_sequence_logprob(net, ex.context, ex.target, ones, dropout, &grads, -inv);
        continue;
      }
      const std::vector<double>& context = (*unsup_.contexts)[idx - train_.size()];
      // Candidates come from the current parameters without dropout and are
      // treated as constants.
      const ConditionalNet dist(net, context, n_);
      std::vector<Valuation> candidates;
      for (ScoredValuation& sv : beam_search(dist, unsup_.beam_width)) {
        candidates.push_back(std::move(sv.valuation));
      }
      const ValiditySplit parts = split_valid_invalid(*unsup_.constraints, candidates);
      const MaskFlags masks = compute_masks(parts.valid, parts.invalid);
      for (std::size_t i = 0; i < parts.invalid.size(); ++i) {
        const std::vector<double> weights(masks[i].begin(), masks[i].end());
        total += unsup_.weight * weighted_sequence_logprob(net, context, parts.invalid[i], weights,
                                                           dropout, &grads, unsup_.weight * inv);
      }
    }
    return total * inv;
  }

  double validation_loss(const nnet::DenseNet& net) override {
    if (valid_.empty()) return 0.0;
    double total = 0.0;
    for (const SeqExample& ex : valid_) {
      total -= joint_logprob(ConditionalNet(net, ex.context, n_), ex.target);
    }
    return total / static_cast<double>(valid_.size());
  }

 private:
  const std::vector<SeqExample>& train_;
  const std::vector<SeqExample>& valid_;
  std::size_t n_;
  UnsupervisedTerm unsup_;
};

void append_history(std::vector<HistoryRow>& history, const std::string& stage,
                    const nnet::TrainResult& result) {
  for (const nnet::EpochRecord& rec : result.history) history.push_back({stage, rec});
}

nnet::DenseNet& mutable_cond(AnyModel& model) {
  return std::visit([](auto& m) -> nnet::DenseNet& { return m.cond; }, model);
}

}  // namespace

nnet::TrainResult train_base_stage(const TabularDataset& train, const TabularDataset& valid,
                                   nnet::DenseNet init, const nnet::TrainConfig& cfg) {
  if (train.rows.empty()) throw std::invalid_argument("train_base_stage: empty training set");
  require_shape(init.input_dim() == train.m() && init.output_dim() == train.n(),
                "base net does not match dataset dimensions");
  BaseObjective objective(train, valid);
  return nnet::train_loop(std::move(init), objective, cfg);
}

std::vector<SeqExample> seq_examples(const AnyModel& model, const TabularDataset& data) {
  const auto& order = label_order(model);
  std::vector<SeqExample> out;
  out.reserve(data.size());
  for (const Row& row : data.rows) {
    out.push_back({context_for(model, row.features), to_model_order(row.labels, order)});
  }
  return out;
}

nnet::TrainResult train_seq_stage(const std::vector<SeqExample>& train,
                                  const std::vector<SeqExample>& valid, nnet::DenseNet init,
                                  std::size_t n_labels, const nnet::TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("train_seq_stage: empty training set");
  SequenceObjective objective(train, valid, n_labels);
  return nnet::train_loop(std::move(init), objective, cfg);
}

TrainedModel train_supervised(const TabularDataset& train, const TabularDataset& valid,
                              const PipelineConfig& cfg) {
  if (train.rows.empty()) throw std::invalid_argument("train_supervised: empty training set");
  const std::size_t m = train.m();
  const std::size_t n = train.n();
  TrainedModel out;
  nnet::TrainConfig base_cfg = cfg.base_train;
  nnet::TrainConfig seq_cfg = cfg.seq_train;
  base_cfg.rng_seed = cfg.seed * 2 + 1;
  seq_cfg.rng_seed = cfg.seed * 2 + 2;

  if (cfg.architecture == Architecture::base_seq) {
    BaseSeqModel model =
        BaseSeqModel::create(m, n, cfg.base_hidden, cfg.cond_hidden, cfg.label_order, cfg.seed);
    nnet::TrainResult base = train_base_stage(train, valid, std::move(model.base), base_cfg);
    model.base = std::move(base.net);
    append_history(out.history, "base", base);
    out.model = std::move(model);
  } else {
    out.model = SeqOnlyModel::create(m, n, cfg.cond_hidden, cfg.label_order, cfg.seed);
  }

  const auto train_ex = seq_examples(out.model, train);
  const auto valid_ex = seq_examples(out.model, valid);
  nnet::DenseNet& cond = mutable_cond(out.model);
  nnet::TrainResult seq = train_seq_stage(train_ex, valid_ex, cond, n, seq_cfg);
  cond = std::move(seq.net);
  append_history(out.history, "seq", seq);
  return out;
}

double mean_nll(const AnyModel& model, const TabularDataset& data) {
  if (data.rows.empty()) throw std::invalid_argument("mean_nll: empty dataset");
  double total = 0.0;
  for (const SeqExample& ex : seq_examples(model, data)) {
    total -= joint_logprob(ConditionalNet(conditional_net(model), ex.context, label_count(model)),
                           ex.target);
  }
  return total / static_cast<double>(data.size());
}

PseudoLabels pseudo_label(const AnyModel& model, const ConstraintSet& cs,
                          const std::vector<std::vector<double>>& inputs, std::size_t k) {
  require_shape(cs.n_vars() == label_count(model), "constraint variables do not match labels");
  PseudoLabels out;
  for (const auto& x : inputs) {
    const ConditionalNet dist = sequential_for(model, x);
    bool kept = false;
    for (const ScoredValuation& sv : beam_search(dist, k)) {
      if (eval_full(cs, sv.valuation)) {
        out.examples.push_back({dist.context(), sv.valuation});
        kept = true;
        break;
      }
    }
    if (!kept) ++out.discarded;
  }
  return out;
}

TrainedModel train_with_pseudo_labels(const TrainedModel& supervised, const SplitDataset& data,
                                      const ConstraintSet& cs, const PipelineConfig& cfg,
                                      PseudoLabels* labels_out) {
  PseudoLabels labels =
      pseudo_label(supervised.model, cs, data.train_unsupervised, cfg.train_beam_width);
  TrainedModel out = supervised;
  if (!labels.examples.empty()) {
    std::vector<SeqExample> train_ex = seq_examples(supervised.model, data.train_supervised);
    train_ex.insert(train_ex.end(), labels.examples.begin(), labels.examples.end());
    const auto valid_ex = seq_examples(supervised.model, data.validation);
    nnet::TrainConfig seq_cfg = cfg.seq_train;
    seq_cfg.rng_seed = cfg.seed * 2 + 3;
    nnet::DenseNet& cond = mutable_cond(out.model);
    nnet::TrainResult seq = train_seq_stage(train_ex, valid_ex, cond, label_count(out.model), seq_cfg);
    cond = std::move(seq.net);
    append_history(out.history, "pseudo", seq);
  }
  if (labels_out != nullptr) *labels_out = std::move(labels);
  return out;
}

TrainedModel train_with_constraint_loss(const TrainedModel& supervised, const SplitDataset& data,
                                        const ConstraintSet& cs, const PipelineConfig& cfg) {
  require_shape(cs.n_vars() == label_count(supervised.model), "constraint variables do not match labels");
  if (!is_satisfiable(cs)) throw ContractError("constraint set is unsatisfiable");
  TrainedModel out = supervised;
  if (cfg.constraint_weight == 0.0 || data.train_unsupervised.empty()) return out;

  const auto train_ex = seq_examples(supervised.model, data.train_supervised);
  const auto valid_ex = seq_examples(supervised.model, data.validation);
  std::vector<std::vector<double>> contexts;
  contexts.reserve(data.train_unsupervised.size());
  for (const auto& x : data.train_unsupervised) contexts.push_back(context_for(supervised.model, x));

  UnsupervisedTerm unsup{&contexts, &cs, cfg.constraint_weight, cfg.train_beam_width};
  SequenceObjective objective(train_ex, valid_ex, label_count(supervised.model), unsup);
  nnet::TrainConfig seq_cfg = cfg.seq_train;
  seq_cfg.rng_seed = cfg.seed * 2 + 4;
  nnet::DenseNet& cond = mutable_cond(out.model);
  nnet::TrainResult seq = nnet::train_loop(cond, objective, seq_cfg);
  cond = std::move(seq.net);
  append_history(out.history, "consloss", seq);
  return out;
}

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::beam: return "beam";
    case DecoderKind::beam_sat: return "beam-sat";
    case DecoderKind::exact: return "exact";
    case DecoderKind::greedy: return "greedy";
    case DecoderKind::independent: return "independent";
  }
  return "unknown";
}

DecoderKind parse_decoder(const std::string& name) {
  for (DecoderKind kind : {DecoderKind::beam, DecoderKind::beam_sat, DecoderKind::exact,
                           DecoderKind::greedy, DecoderKind::independent}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown decoder '" + name + "'");
}

std::vector<ScoredValuation> decode(const AnyModel& model, std::span<const double> x,
                                    const DecoderSpec& spec, const ConstraintSet* cs,
                                    std::size_t min_entries) {
  switch (spec.kind) {
    case DecoderKind::beam:
      return beam_search(sequential_for(model, x), spec.width);
    case DecoderKind::beam_sat:
      if (cs == nullptr) throw ContractError("beam-sat decoding needs a constraint set");
      return beam_search_sat(sequential_for(model, x), spec.width, *cs);
    case DecoderKind::exact:
      return exact_topk(sequential_for(model, x), std::max(spec.width, min_entries),
                        spec.enumeration_cap);
    case DecoderKind::greedy: {
      const ConditionalNet dist = sequential_for(model, x);
      Valuation v = ancestral_sample(dist, SamplingStrategy::greedy());
      const double logp = joint_logprob(dist, v);
      return {{std::move(v), logp}};
    }
    case DecoderKind::independent: {
      const auto* bs = std::get_if<BaseSeqModel>(&model);
      if (bs == nullptr) throw ContractError("the independent decoder needs a Base-Seq model");
      return beam_search(IndependentMarginals(base_predict(*bs, x)), spec.width);
    }
  }
  throw ContractError("unhandled decoder");
}

EvalReport evaluate(const AnyModel& model, const ConstraintSet* cs, const TabularDataset& test,
                    const DecoderSpec& decoder, const std::vector<std::size_t>& k_list,
                    std::uint64_t seed) {
  if (test.rows.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (cs != nullptr) {
    require_shape(cs->n_vars() == label_count(model), "constraint variables do not match labels");
  }
  std::vector<std::size_t> ks = k_list;
  if (std::find(ks.begin(), ks.end(), std::size_t{1}) == ks.end()) ks.push_back(1);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() == 0) throw std::invalid_argument("top-k values must be positive");

  const auto& order = label_order(model);
  std::size_t exact_hits = 0;
  std::size_t violations = 0;
  std::vector<std::size_t> topk_hits(ks.size(), 0);
  double target_prob = 0.0;

  for (const Row& row : test.rows) {
    const Valuation target = to_model_order(row.labels, order);
    const auto ranked = decode(model, row.features, decoder, cs, ks.back());
    if (!ranked.empty()) {
      if (ranked.front().valuation == target) ++exact_hits;
      if (cs != nullptr && !eval_full(*cs, ranked.front().valuation)) ++violations;
    }
    const auto pos = std::find_if(ranked.begin(), ranked.end(),
                                  [&](const ScoredValuation& sv) { return sv.valuation == target; });
    const auto rank = static_cast<std::size_t>(pos - ranked.begin());
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (pos != ranked.end() && rank < ks[i]) ++topk_hits[i];
    }
    if (decoder.kind == DecoderKind::independent) {
      target_prob += joint_prob_base(base_predict(std::get<BaseSeqModel>(model), row.features), target);
    } else {
      target_prob += std::exp(joint_logprob(sequential_for(model, row.features), target));
    }
  }

  const double count = static_cast<double>(test.size());
  EvalReport report;
  report.accuracy = static_cast<double>(exact_hits) / count;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.topk_accuracy[ks[i]] = static_cast<double>(topk_hits[i]) / count;
  }
  report.violation_ratio = static_cast<double>(violations) / count;
  report.mean_target_probability = target_prob / count;
  report.k_list = ks;
  report.decoder = to_string(decoder.kind);
  report.beam_width = decoder.width;
  report.seed = seed;
  report.n_samples = test.size();
  return report;
}

namespace {

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json topk = nlohmann::json::object();
  for (const auto& [k, acc] : r.topk_accuracy) topk[std::to_string(k)] = acc;
  return {{"accuracy", r.accuracy},
          {"topk_accuracy", topk},
          {"violation_ratio", r.violation_ratio},
          {"mean_target_probability", r.mean_target_probability},
          {"k", r.k_list},
          {"decoder", r.decoder},
          {"beam_width", r.beam_width},
          {"seed", r.seed},
          {"n_samples", r.n_samples}};
}

}  // namespace

std::string EvalReport::to_json() const { return report_json(*this).dump(2); }

std::string UnsupResult::to_json() const {
  const nlohmann::json j = {{"ratio", ratio},
                            {"method", method == UnsupMethod::pseudo ? "pseudo" : "consloss"},
                            {"baseline", report_json(baseline)},
                            {"with_unsupervised", report_json(with_unsupervised)},
                            {"accuracy_delta", accuracy_delta},
                            {"violation_delta", violation_delta},
                            {"pseudo_retained", pseudo_retained},
                            {"pseudo_discarded", pseudo_discarded}};
  return j.dump(2);
}

UnsupResult run_unsupervised_experiment(const DatasetSplit& data, const ConstraintSet& cs,
                                        const PipelineConfig& cfg, UnsupMethod method,
                                        double ratio, const DecoderSpec& decoder,
                                        const std::vector<std::size_t>& k_list) {
  const SplitDataset split = make_split_dataset(data, ratio, cfg.seed + 7919);
  const TrainedModel supervised = train_supervised(split.train_supervised, split.validation, cfg);

  UnsupResult out;
  out.ratio = ratio;
  out.method = method;
  TrainedModel improved;
  if (method == UnsupMethod::pseudo) {
    PseudoLabels labels;
    improved = train_with_pseudo_labels(supervised, split, cs, cfg, &labels);
    out.pseudo_retained = labels.examples.size();
    out.pseudo_discarded = labels.discarded;
  } else {
    improved = train_with_constraint_loss(supervised, split, cs, cfg);
  }
  out.baseline = evaluate(supervised.model, &cs, split.test, decoder, k_list, cfg.seed);
  out.with_unsupervised = evaluate(improved.model, &cs, split.test, decoder, k_list, cfg.seed);
  out.accuracy_delta = out.with_unsupervised.accuracy - out.baseline.accuracy;
  out.violation_delta = out.with_unsupervised.violation_ratio - out.baseline.violation_ratio;
  return out;
}

}  // namespace seqlabel

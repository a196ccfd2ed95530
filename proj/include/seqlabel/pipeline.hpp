#ifndef SEQLABEL_PIPELINE_HPP
#define SEQLABEL_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqlabel/constraints.hpp"
#include "seqlabel/data_io.hpp"
#include "seqlabel/inference.hpp"
#include "seqlabel/model.hpp"
#include "seqlabel/nnet.hpp"

namespace seqlabel {

enum class Architecture { base_seq, seq_only };

/// Base stage: Adam lr 1e-4, weight decay 1e-4, dropout 0.8, batch 4, patience 20.
nnet::TrainConfig base_stage_defaults();
/// Sequential stage: Adam lr 1e-3, weight decay 1e-3, dropout 0.1, batch 16, patience 20.
nnet::TrainConfig seq_stage_defaults();

struct PipelineConfig {
  Architecture architecture = Architecture::base_seq;
  nnet::TrainConfig base_train = base_stage_defaults();
  nnet::TrainConfig seq_train = seq_stage_defaults();
  std::vector<std::size_t> base_hidden{128, 128};
  std::vector<std::size_t> cond_hidden{300, 300};
  std::vector<std::size_t> label_order;  // empty = dataset column order
  std::size_t train_beam_width = 5;
  double constraint_weight = 1.0;  // lambda in L_sup + lambda * L_cons
  std::uint64_t seed = 0;
};

/// Train / unsupervised / validation / test partition. The unsupervised
/// part keeps only features.
struct SplitDataset {
  TabularDataset train_supervised;
  std::vector<std::vector<double>> train_unsupervised;
  TabularDataset validation;
  TabularDataset test;
  double unsupervised_ratio = 0.0;
};

/// Cuts floor(ratio * |train|) seeded-random rows out of the training set
/// and drops their labels.
SplitDataset make_split_dataset(const DatasetSplit& split, double unsupervised_ratio,
                                std::uint64_t seed);

struct HistoryRow {
  std::string stage;
  nnet::EpochRecord record;
};

struct TrainedModel {
  AnyModel model;
  std::vector<HistoryRow> history;
};

/// stage,epoch,train_loss,valid_loss
std::string history_to_csv(const std::vector<HistoryRow>& history);

/// Trains the base net on mean per-label BCE with early stopping on
/// validation BCE.
nnet::TrainResult train_base_stage(const TabularDataset& train, const TabularDataset& valid,
                                   nnet::DenseNet init, const nnet::TrainConfig& cfg);

/// One training example for the conditional net, in model label order.
struct SeqExample {
  std::vector<double> context;
  Valuation target;
};

/// Conditioning examples for a labeled dataset: base marginals (dropout
/// off) or raw features, targets permuted into model order.
std::vector<SeqExample> seq_examples(const AnyModel& model, const TabularDataset& data);

/// Trains the conditional net on the supervised NLL, early stopping on
/// validation NLL.
nnet::TrainResult train_seq_stage(const std::vector<SeqExample>& train,
                                  const std::vector<SeqExample>& valid, nnet::DenseNet init,
                                  std::size_t n_labels, const nnet::TrainConfig& cfg);

/// Fresh model from the config, then base stage (Base-Seq only) and the
/// sequential stage with the base frozen.
TrainedModel train_supervised(const TabularDataset& train, const TabularDataset& valid,
                              const PipelineConfig& cfg);

/// Mean NLL of the labeled rows under the model (no dropout).
double mean_nll(const AnyModel& model, const TabularDataset& data);

struct PseudoLabels {
  std::vector<SeqExample> examples;  // retained inputs with model-order labels
  std::size_t discarded = 0;
};

/// For each input: width-k beam search, keep the best valuation that
/// satisfies `cs`; inputs with no valid candidate are discarded.
PseudoLabels pseudo_label(const AnyModel& model, const ConstraintSet& cs,
                          const std::vector<std::vector<double>>& inputs, std::size_t k);

/// Second round of sequential training on supervised plus pseudo-labeled
/// examples, starting from the supervised model. With nothing retained the
/// supervised model is returned unchanged.
TrainedModel train_with_pseudo_labels(const TrainedModel& supervised, const SplitDataset& data,
                                      const ConstraintSet& cs, const PipelineConfig& cfg,
                                      PseudoLabels* labels_out = nullptr);

/// Continues sequential training from the supervised model on L_sup for
/// labeled samples and lambda * L_cons for unsupervised ones, with beams
/// recomputed from the current parameters for every batch. With lambda 0
/// or no unsupervised inputs the supervised model is returned unchanged.
TrainedModel train_with_constraint_loss(const TrainedModel& supervised, const SplitDataset& data,
                                        const ConstraintSet& cs, const PipelineConfig& cfg);

enum class DecoderKind { beam, beam_sat, exact, greedy, independent };

std::string to_string(DecoderKind kind);
DecoderKind parse_decoder(const std::string& name);

struct DecoderSpec {
  DecoderKind kind = DecoderKind::beam;
  std::size_t width = 4;  // beam width, or entries kept by `exact`
  std::size_t enumeration_cap = kDefaultEnumerationCap;
};

/// Ranked predictions (model order) for input x. `independent` decodes the
/// base marginals under the independence product (Base-Seq only).
std::vector<ScoredValuation> decode(const AnyModel& model, std::span<const double> x,
                                    const DecoderSpec& spec, const ConstraintSet* cs = nullptr,
                                    std::size_t min_entries = 1);

struct EvalReport {
  double accuracy = 0.0;
  std::map<std::size_t, double> topk_accuracy;
  double violation_ratio = 0.0;
  double mean_target_probability = 0.0;
  std::vector<std::size_t> k_list;
  std::string decoder;
  std::size_t beam_width = 0;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;

  std::string to_json() const;
};

/// Exact-match accuracy of the top-1, top-k hit rates, violation ratio of
/// the top-1 (0 without constraints) and mean joint probability of the
/// targets. Throws std::invalid_argument on an empty test set.
EvalReport evaluate(const AnyModel& model, const ConstraintSet* cs, const TabularDataset& test,
                    const DecoderSpec& decoder, const std::vector<std::size_t>& k_list,
                    std::uint64_t seed);

enum class UnsupMethod { pseudo, consloss };

struct UnsupResult {
  double ratio = 0.0;
  UnsupMethod method = UnsupMethod::pseudo;
  EvalReport baseline;
  EvalReport with_unsupervised;
  double accuracy_delta = 0.0;
  double violation_delta = 0.0;
  std::size_t pseudo_retained = 0;
  std::size_t pseudo_discarded = 0;

  std::string to_json() const;
};

/// Splits off the unsupervised part, trains the supervised baseline, then
/// the chosen unsupervised method, and evaluates both on the test set.
UnsupResult run_unsupervised_experiment(const DatasetSplit& data, const ConstraintSet& cs,
                                        const PipelineConfig& cfg, UnsupMethod method,
                                        double ratio, const DecoderSpec& decoder,
                                        const std::vector<std::size_t>& k_list);

}  // namespace seqlabel

#endif  // SEQLABEL_PIPELINE_HPP

#ifndef SEQLABEL_MODEL_HPP
#define SEQLABEL_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "seqlabel/nnet.hpp"
#include "seqlabel/valuation.hpp"

namespace seqlabel {

/// Per-step probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon]
/// before taking logs.
inline constexpr double kProbEpsilon = 1e-7;

/// Autoregressive distribution over n binary labels: the product of
/// P(O_{j+1} | O_1..O_j) for j = 0..n-1.
class SequentialDistribution {
 public:
  virtual ~SequentialDistribution() = default;

  virtual std::size_t n_labels() const = 0;
  /// Probability that the label following `prefix` is true.
  /// Requires prefix.size() < n_labels().
  virtual double conditional(const PrefixValuation& prefix) const = 0;
};

/// A conditional network evaluated against a fixed context vector: the
/// base marginals for Base-Seq, the raw features for Seq-only.
class ConditionalNet final : public SequentialDistribution {
 public:
  /// Keeps a reference to `net`, which must outlive this object.
  ConditionalNet(const nnet::DenseNet& net, std::vector<double> context, std::size_t n_labels);
  ConditionalNet(nnet::DenseNet&&, std::vector<double>, std::size_t) = delete;

  std::size_t n_labels() const override { return n_; }
  double conditional(const PrefixValuation& prefix) const override;

  std::vector<double> encode(const PrefixValuation& prefix) const;
  const nnet::DenseNet& net() const noexcept { return *net_; }
  const std::vector<double>& context() const noexcept { return context_; }

 private:
  const nnet::DenseNet* net_;
  std::vector<double> context_;
  std::size_t n_;
};

/// Independence product over marginals. Conditionals ignore the prefix.
class IndependentMarginals final : public SequentialDistribution {
 public:
  explicit IndependentMarginals(MarginalAssignment pa) : pa_(std::move(pa)) {}

  std::size_t n_labels() const override { return pa_.size(); }
  double conditional(const PrefixValuation& prefix) const override;

 private:
  MarginalAssignment pa_;
};

/// [context | prefix bits (0 past the prefix) | known mask], width
/// context.size() + 2n.
std::vector<double> encode_context_prefix(std::span<const double> context,
                                          const PrefixValuation& prefix, std::size_t n);

/// The 3n-wide conditional input for marginals `pa`.
std::vector<double> encode_cond_input(const MarginalAssignment& pa, const PrefixValuation& prefix);

/// Probability of the observed bit under conditional `c`, clamped.
double step_probability(double c, bool bit);
/// log(step_probability(c, bit)).
double step_log_term(double c, bool bit);

/// Sum over steps of log(step_probability). Accumulated left to right from
/// 0.0, so decoders that extend prefixes reproduce it bit for bit.
double joint_logprob(const SequentialDistribution& dist, const Valuation& v);

/// prod_j (v_j pa_j + (1 - v_j)(1 - pa_j)), unclamped.
double joint_prob_base(const MarginalAssignment& pa, const Valuation& v);

/// Base net (m -> n marginals) feeding a shared conditional net (3n -> 1).
/// label_order[i] is the 0-based dataset column predicted at model
/// position i.
struct BaseSeqModel {
  nnet::DenseNet base;
  nnet::DenseNet cond;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::size_t> label_order;

  static BaseSeqModel create(std::size_t m, std::size_t n, const std::vector<std::size_t>& base_hidden,
                             const std::vector<std::size_t>& cond_hidden,
                             std::vector<std::size_t> label_order, std::uint64_t seed);
  /// Throws ShapeError if the nets or label order do not fit n and m.
  void validate() const;
};

/// Single conditional net over [features | prefix bits | mask], (m + 2n) -> 1.
struct SeqOnlyModel {
  nnet::DenseNet cond;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::size_t> label_order;

  static SeqOnlyModel create(std::size_t m, std::size_t n, const std::vector<std::size_t>& cond_hidden,
                             std::vector<std::size_t> label_order, std::uint64_t seed);
  void validate() const;
};

std::vector<std::size_t> identity_order(std::size_t n);
std::vector<std::size_t> reversed_order(std::size_t n);
/// Throws ShapeError unless `order` is a permutation of 0..n-1.
void check_permutation(const std::vector<std::size_t>& order, std::size_t n);

/// out[i] = column_values[order[i]]: dataset column order -> model order.
Valuation to_model_order(const Valuation& column_values, const std::vector<std::size_t>& order);
Valuation to_column_order(const Valuation& model_values, const std::vector<std::size_t>& order);

/// Base net outputs, reordered by label_order.
MarginalAssignment base_predict(const BaseSeqModel& model, std::span<const double> x);
double cond_predict(const BaseSeqModel& model, const MarginalAssignment& pa,
                    const PrefixValuation& prefix);
double joint_logprob_seq(const BaseSeqModel& model, const MarginalAssignment& pa, const Valuation& v);
double seq_only_cond_predict(const SeqOnlyModel& model, std::span<const double> x,
                             const PrefixValuation& prefix);

using AnyModel = std::variant<BaseSeqModel, SeqOnlyModel>;

std::size_t label_count(const AnyModel& model);
std::size_t feature_count(const AnyModel& model);
const std::vector<std::size_t>& label_order(const AnyModel& model);
const nnet::DenseNet& conditional_net(const AnyModel& model);

/// Conditioning context for input x: base marginals or x itself.
std::vector<double> context_for(const AnyModel& model, std::span<const double> x);
/// The model's distribution over valuations (model order) for input x.
/// The result refers to the model's conditional net; the model must outlive it.
ConditionalNet sequential_for(const AnyModel& model, std::span<const double> x);
ConditionalNet sequential_for(const BaseSeqModel& model, std::span<const double> x);
ConditionalNet sequential_for(const SeqOnlyModel& model, std::span<const double> x);
ConditionalNet sequential_for(AnyModel&&, std::span<const double>) = delete;
ConditionalNet sequential_for(BaseSeqModel&&, std::span<const double>) = delete;
ConditionalNet sequential_for(SeqOnlyModel&&, std::span<const double>) = delete;

/// Model plus the seed it was trained with. Text format with header
/// "SEQLABEL-BUNDLE-1"; label order is stored 1-based.
struct ModelBundle {
  AnyModel model;
  std::uint64_t seed = 0;
};

void save_bundle(const ModelBundle& bundle, std::ostream& out);
ModelBundle load_bundle(std::istream& in);

}  // namespace seqlabel

#endif  // SEQLABEL_MODEL_HPP

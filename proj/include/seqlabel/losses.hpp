#ifndef SEQLABEL_LOSSES_HPP
#define SEQLABEL_LOSSES_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "seqlabel/model.hpp"
#include "seqlabel/nnet.hpp"
#include "seqlabel/valuation.hpp"

namespace seqlabel {

struct LossResult {
  double loss = 0.0;
  nnet::Gradients grads;  // d loss / d conditional-net parameters
};

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pa
};

/// Mean per-label binary cross-entropy with probabilities clamped to
/// [kProbEpsilon, 1 - kProbEpsilon]; the gradient is zero where clamping is
/// active.
BceResult base_bce_loss(const MarginalAssignment& pa, const Valuation& target);

/// Sum over steps j of weights[j] * log(step term j) for valuation `v`
/// under the conditional net with the given context. When `grads` is non-null,
/// adds scale * d(sum)/d(params) into it. All n conditionals are evaluated
/// with the same dropout spec.
double weighted_sequence_logprob(const nnet::DenseNet& cond, std::span<const double> context,
                                 const Valuation& v, std::span<const double> weights,
                                 const nnet::DropoutSpec& dropout, nnet::Gradients* grads,
                                 double scale = 1.0);

/// Negative log-likelihood of the target valuation.
LossResult supervised_loss(const nnet::DenseNet& cond, std::span<const double> context,
                           const Valuation& target, const nnet::DropoutSpec& dropout = {});
LossResult supervised_loss(const BaseSeqModel& model, const MarginalAssignment& pa,
                           const Valuation& target);

/// masks[i][j] gates step j+1 of invalid[i]: false iff the length-(j+1)
/// prefix of invalid[i] is also a prefix of some valid valuation.
using MaskFlags = std::vector<std::vector<bool>>;
MaskFlags compute_masks(const std::vector<Valuation>& valid, const std::vector<Valuation>& invalid);

/// Sum over invalid valuations of their prefix-masked log-probability.
/// Minimizing it pushes unshared decisions of invalid samples down. The
/// sampled valuations are constants; gradients flow only through the
/// conditional evaluations.
LossResult constraint_loss(const nnet::DenseNet& cond, std::span<const double> context,
                           const std::vector<Valuation>& valid,
                           const std::vector<Valuation>& invalid,
                           const nnet::DropoutSpec& dropout = {});
LossResult constraint_loss(const BaseSeqModel& model, const MarginalAssignment& pa,
                           const std::vector<Valuation>& valid, const std::vector<Valuation>& invalid);

}  // namespace seqlabel

#endif  // SEQLABEL_LOSSES_HPP

#include "seqlabel/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "seqlabel/errors.hpp"

namespace seqlabel {

namespace {

// d/dc log(step_probability(c, bit)), zero where the clamp is active.
double step_log_derivative(double c, bool bit) {
  const double p = bit ? c : 1.0 - c;
  if (!(p > kProbEpsilon && p < 1.0 - kProbEpsilon)) return 0.0;
  return bit ? 1.0 / c : -1.0 / (1.0 - c);
}

}  // namespace

BceResult base_bce_loss(const MarginalAssignment& pa, const Valuation& target) {
  require_shape(pa.size() == target.size() && !pa.empty(), "base_bce_loss: length mismatch");
  const double n = static_cast<double>(pa.size());
  BceResult out;
  out.grad.assign(pa.size(), 0.0);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double raw = pa[i];
    const double p = std::clamp(raw, kProbEpsilon, 1.0 - kProbEpsilon);
    const bool t = target[i];
    out.loss -= t ? std::log(p) : std::log(1.0 - p);
    if (raw > kProbEpsilon && raw < 1.0 - kProbEpsilon) {
      out.grad[i] = (t ? -1.0 / p : 1.0 / (1.0 - p)) / n;
    }
  }
  out.loss /= n;
  return out;
}

double weighted_sequence_logprob(const nnet::DenseNet& cond, std::span<const double> context,
                                 const Valuation& v, std::span<const double> weights,
                                 const nnet::DropoutSpec& dropout, nnet::Gradients* grads,
                                 double scale) {
  const std::size_t n = v.size();
  require_shape(weights.size() == n, "step weight count must equal label count");
  require_shape(cond.input_dim() == context.size() + 2 * n && cond.output_dim() == 1,
                "conditional net does not match context + 2n -> 1");
  double total = 0.0;
  PrefixValuation prefix;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = weights[j];
    if (w != 0.0) {
      const auto input = encode_context_prefix(context, prefix, n);
      const nnet::ForwardTrace trace = nnet::forward_trace(cond, input, dropout);
      const double c = trace.output[0];
      total += w * step_log_term(c, v[j]);
      if (grads != nullptr) {
        const double upstream = scale * w * step_log_derivative(c, v[j]);
        if (upstream != 0.0) {
          const std::array<double, 1> up{upstream};
          nnet::accumulate_backward(cond, trace, up, *grads);
        }
      }
    }
    prefix.push_back(v[j]);
  }
  return total;
}

LossResult supervised_loss(const nnet::DenseNet& cond, std::span<const double> context,
                           const Valuation& target, const nnet::DropoutSpec& dropout) {
  LossResult out;
  out.grads = nnet::Gradients::zeros_like(cond);
  const std::vector<double> ones(target.size(), 1.0);
  out.loss = -weighted_sequence_logprob(cond, context, target, ones, dropout, &out.grads, -1.0);
  return out;
}

LossResult supervised_loss(const BaseSeqModel& model, const MarginalAssignment& pa,
                           const Valuation& target) {
  require_shape(pa.size() == model.n && target.size() == model.n, "supervised_loss: length mismatch");
  return supervised_loss(model.cond, pa, target);
}

MaskFlags compute_masks(const std::vector<Valuation>& valid, const std::vector<Valuation>& invalid) {
  // Binary trie over the valid valuations; node 0 is the empty prefix.
  std::vector<std::array<int, 2>> trie{{-1, -1}};
  for (const Valuation& v : valid) {
    std::size_t node = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      int& child = trie[node][v[j] ? 1 : 0];
      if (child < 0) {
        child = static_cast<int>(trie.size());
        trie.push_back({-1, -1});
      }
      node = static_cast<std::size_t>(trie[node][v[j] ? 1 : 0]);
    }
  }

  MaskFlags masks;
  masks.reserve(invalid.size());
  for (const Valuation& v : invalid) {
    std::vector<bool> mask(v.size(), true);
    int node = 0;
    for (std::size_t j = 0; j < v.size() && node >= 0; ++j) {
      node = trie[static_cast<std::size_t>(node)][v[j] ? 1 : 0];
      if (node >= 0) mask[j] = false;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

LossResult constraint_loss(const nnet::DenseNet& cond, std::span<const double> context,
                           const std::vector<Valuation>& valid,
                           const std::vector<Valuation>& invalid,
                           const nnet::DropoutSpec& dropout) {
  LossResult out;
  out.grads = nnet::Gradients::zeros_like(cond);
  const MaskFlags masks = compute_masks(valid, invalid);
  for (std::size_t i = 0; i < invalid.size(); ++i) {
    std::vector<double> weights(masks[i].begin(), masks[i].end());
    out.loss += weighted_sequence_logprob(cond, context, invalid[i], weights, dropout, &out.grads);
  }
  return out;
}

LossResult constraint_loss(const BaseSeqModel& model, const MarginalAssignment& pa,
                           const std::vector<Valuation>& valid, const std::vector<Valuation>& invalid) {
  require_shape(pa.size() == model.n, "constraint_loss: marginal count mismatch");
  return constraint_loss(model.cond, pa, valid, invalid);
}

}  // namespace seqlabel

#ifndef SEQLABEL_INFERENCE_HPP
#define SEQLABEL_INFERENCE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "seqlabel/constraints.hpp"
#include "seqlabel/model.hpp"
#include "seqlabel/valuation.hpp"

namespace seqlabel {

struct ScoredValuation {
  Valuation valuation;
  double logp = 0.0;

  friend bool operator==(const ScoredValuation&, const ScoredValuation&) = default;
};

/// Decoder ranking: higher logp first, then lexicographic (false < true).
bool ranks_before(const ScoredValuation& a, const ScoredValuation& b);

struct SamplingStrategy {
  enum class Kind { greedy, bernoulli };

  Kind kind = Kind::greedy;
  std::uint64_t seed = 0;

  /// true iff P > 0.5.
  static SamplingStrategy greedy() { return {Kind::greedy, 0}; }
  static SamplingStrategy bernoulli(std::uint64_t seed) { return {Kind::bernoulli, seed}; }
};

/// Extends the empty prefix one label at a time, letting the strategy pick
/// each bit from the model's conditional.
Valuation ancestral_sample(const SequentialDistribution& dist, const SamplingStrategy& strategy);

/// Width-k beam search. Each round extends every kept prefix by false and
/// true, then keeps the k best. Output is sorted with ranks_before.
std::vector<ScoredValuation> beam_search(const SequentialDistribution& dist, std::size_t k);

/// Beam search that drops every child prefix with no satisfying completion.
/// Throws ContractError if `cs` is unsatisfiable.
std::vector<ScoredValuation> beam_search_sat(const SequentialDistribution& dist, std::size_t k,
                                             const ConstraintSet& cs);

inline constexpr std::size_t kDefaultEnumerationCap = 20;

/// The k most probable valuations by full enumeration. Throws ContractError
/// when n exceeds `cap`.
std::vector<ScoredValuation> exact_topk(const SequentialDistribution& dist, std::size_t k,
                                        std::size_t cap = kDefaultEnumerationCap);

/// JSON array of {"valuation": "0101", "logp": -1.23} records.
std::string decoded_to_json(const std::vector<ScoredValuation>& decoded);

}  // namespace seqlabel

#endif  // SEQLABEL_INFERENCE_HPP

#include "seqlabel/inference.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include <json.hpp>

#include "seqlabel/errors.hpp"

namespace seqlabel {

bool ranks_before(const ScoredValuation& a, const ScoredValuation& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return a.valuation < b.valuation;
}

Valuation ancestral_sample(const SequentialDistribution& dist, const SamplingStrategy& strategy) {
  std::mt19937_64 rng(strategy.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Valuation v;
  while (v.size() < dist.n_labels()) {
    const double p = dist.conditional(v);
    const bool bit = strategy.kind == SamplingStrategy::Kind::greedy ? p > 0.5 : unit(rng) < p;
    v.push_back(bit);
  }
  return v;
}

namespace {

using PrefixFilter = std::function<bool(const PrefixValuation&)>;

std::vector<ScoredValuation> run_beam(const SequentialDistribution& dist, std::size_t k,
                                      const PrefixFilter& keep) {
  if (k == 0) throw ContractError("beam width must be at least 1");
  std::vector<ScoredValuation> beam{{Valuation{}, 0.0}};
  std::vector<ScoredValuation> children;
  for (std::size_t step = 0; step < dist.n_labels(); ++step) {
    children.clear();
    children.reserve(2 * beam.size());
    for (const ScoredValuation& parent : beam) {
      const double c = dist.conditional(parent.valuation);
      for (bool bit : {false, true}) {
        Valuation child = parent.valuation.extended(bit);
        if (keep && !keep(child)) continue;
        children.push_back({std::move(child), parent.logp + step_log_term(c, bit)});
      }
    }
    std::sort(children.begin(), children.end(), ranks_before);
    if (children.size() > k) children.resize(k);
    beam.swap(children);
    if (beam.empty()) break;
  }
  return beam;
}

}  // namespace

std::vector<ScoredValuation> beam_search(const SequentialDistribution& dist, std::size_t k) {
  return run_beam(dist, k, nullptr);
}

std::vector<ScoredValuation> beam_search_sat(const SequentialDistribution& dist, std::size_t k,
                                             const ConstraintSet& cs) {
  require_shape(cs.n_vars() == dist.n_labels(), "constraint variable count does not match labels");
  if (!is_satisfiable(cs)) throw ContractError("constraint set is unsatisfiable");
  if (cs.empty()) return run_beam(dist, k, nullptr);
  return run_beam(dist, k, [&cs](const PrefixValuation& p) { return sat_with_prefix(cs, p); });
}

std::vector<ScoredValuation> exact_topk(const SequentialDistribution& dist, std::size_t k,
                                        std::size_t cap) {
  const std::size_t n = dist.n_labels();
  if (n > cap) {
    throw ContractError("exact enumeration refused: " + std::to_string(n) +
                        " labels exceeds the cap of " + std::to_string(cap));
  }
  std::vector<ScoredValuation> all;
  all.reserve(std::size_t{1} << n);
  // Depth-first over the prefix tree; each logp is accumulated in the same
  // order as joint_logprob.
  Valuation prefix;
  std::function<void(double)> visit = [&](double logp) {
    if (prefix.size() == n) {
      all.push_back({prefix, logp});
      return;
    }
    const double c = dist.conditional(prefix);
    for (bool bit : {false, true}) {
      prefix.push_back(bit);
      visit(logp + step_log_term(c, bit));
      prefix.pop_back();
    }
  };
  visit(0.0);
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    ranks_before);
  all.resize(keep);
  return all;
}

std::string decoded_to_json(const std::vector<ScoredValuation>& decoded) {
  nlohmann::json records = nlohmann::json::array();
  for (const ScoredValuation& sv : decoded) {
    records.push_back({{"valuation", sv.valuation.to_string()}, {"logp", sv.logp}});
  }
  return records.dump();
}

}  // namespace seqlabel

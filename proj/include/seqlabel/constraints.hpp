#ifndef SEQLABEL_CONSTRAINTS_HPP
#define SEQLABEL_CONSTRAINTS_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "seqlabel/valuation.hpp"

namespace seqlabel {

/// Output variable O_var (1-based), possibly negated.
struct Literal {
  std::size_t var = 1;
  bool positive = true;

  friend bool operator==(const Literal&, const Literal&) = default;
  friend auto operator<=>(const Literal&, const Literal&) = default;
};

using Clause = std::vector<Literal>;

/// CNF over the output labels. Variable i is the label at model position i.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  /// Throws ShapeError on an empty clause or an out-of-range variable.
  /// Repeated literals inside a clause are collapsed (first occurrence kept).
  ConstraintSet(std::size_t n_vars, std::vector<Clause> clauses);

  std::size_t n_vars() const noexcept { return n_vars_; }
  const std::vector<Clause>& clauses() const noexcept { return clauses_; }
  bool empty() const noexcept { return clauses_.empty(); }

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;

 private:
  std::size_t n_vars_ = 0;
  std::vector<Clause> clauses_;
};

/// DIMACS CNF: `c` comment lines, `p cnf <vars> <clauses>`, then clauses of
/// nonzero integers each terminated by 0. Errors carry the line number.
ConstraintSet parse_dimacs(std::string_view text);
std::string to_dimacs(const ConstraintSet& cs);

/// True iff every clause has a satisfied literal under the full valuation.
bool eval_full(const ConstraintSet& cs, const Valuation& v);

/// True iff some completion of `prefix` (which fixes O1..Oj) satisfies the
/// formula. DPLL with unit propagation, branching on the lowest free variable.
bool sat_with_prefix(const ConstraintSet& cs, const PrefixValuation& prefix);

inline bool is_satisfiable(const ConstraintSet& cs) { return sat_with_prefix(cs, {}); }

struct ValiditySplit {
  std::vector<Valuation> valid;
  std::vector<Valuation> invalid;
};

/// Partitions by eval_full, preserving input order within each part.
ValiditySplit split_valid_invalid(const ConstraintSet& cs, const std::vector<Valuation>& valuations);

}  // namespace seqlabel

#endif  // SEQLABEL_CONSTRAINTS_HPP

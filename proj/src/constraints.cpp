#include "seqlabel/constraints.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>

#include "seqlabel/errors.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel {

ConstraintSet::ConstraintSet(std::size_t n_vars, std::vector<Clause> clauses) : n_vars_(n_vars) {
  clauses_.reserve(clauses.size());
  for (Clause& clause : clauses) {
    if (clause.empty()) throw ShapeError("constraint set contains an empty clause");
    Clause unique;
    for (const Literal& lit : clause) {
      if (lit.var == 0 || lit.var > n_vars_) {
        throw ShapeError("literal variable " + std::to_string(lit.var) + " outside 1.." +
                         std::to_string(n_vars_));
      }
      if (std::find(unique.begin(), unique.end(), lit) == unique.end()) unique.push_back(lit);
    }
    clauses_.push_back(std::move(unique));
  }
}

ConstraintSet parse_dimacs(std::string_view text) {
  const auto all_lines = text::lines(text);
  bool have_header = false;
  long long n_vars = 0;
  long long n_clauses = 0;
  std::size_t header_line = 0;
  std::vector<Clause> clauses;
  Clause current;

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = text::trim(all_lines[i]);
    if (line.empty() || line.front() == 'c') continue;
    if (line.front() == 'p') {
      if (have_header) throw ParseError(line_no, "duplicate problem line");
      const auto tokens = text::split_ws(line);
      if (tokens.size() != 4 || tokens[0] != "p" || tokens[1] != "cnf") {
        throw ParseError(line_no, "malformed header, expected 'p cnf <vars> <clauses>'");
      }
      const auto v = text::parse_int(tokens[2]);
      const auto c = text::parse_int(tokens[3]);
      if (!v || !c || *v <= 0 || *c < 0) {
        throw ParseError(line_no, "malformed header counts");
      }
      n_vars = *v;
      n_clauses = *c;
      have_header = true;
      header_line = line_no;
      continue;
    }
    if (!have_header) throw ParseError(line_no, "clause before 'p cnf' header");
    for (std::string_view token : text::split_ws(line)) {
      const auto lit = text::parse_int(token);
      if (!lit) throw ParseError(line_no, "bad literal '" + std::string(token) + "'");
      if (*lit == 0) {
        if (current.empty()) throw ParseError(line_no, "empty clause");
        clauses.push_back(std::move(current));
        current.clear();
        continue;
      }
      const long long var = *lit < 0 ? -*lit : *lit;
      if (var > n_vars) {
        throw ParseError(line_no, "literal " + std::to_string(*lit) + " out of range 1.." +
                                      std::to_string(n_vars));
      }
      current.push_back({static_cast<std::size_t>(var), *lit > 0});
    }
  }
  if (!have_header) throw ParseError(0, "missing 'p cnf' header");
  if (!current.empty()) {
    throw ParseError(all_lines.size(), "last clause is not terminated by 0");
  }
  if (static_cast<long long>(clauses.size()) != n_clauses) {
    throw ParseError(header_line, "header declares " + std::to_string(n_clauses) +
                                      " clauses, found " + std::to_string(clauses.size()));
  }
  return ConstraintSet(static_cast<std::size_t>(n_vars), std::move(clauses));
}

std::string to_dimacs(const ConstraintSet& cs) {
  std::ostringstream out;
  out << "p cnf " << cs.n_vars() << ' ' << cs.clauses().size() << '\n';
  for (const Clause& clause : cs.clauses()) {
    for (const Literal& lit : clause) {
      out << (lit.positive ? "" : "-") << lit.var << ' ';
    }
    out << "0\n";
  }
  return out.str();
}

bool eval_full(const ConstraintSet& cs, const Valuation& v) {
  require_shape(v.size() == cs.n_vars(), "eval_full: valuation has " + std::to_string(v.size()) +
                                             " labels, constraints have " +
                                             std::to_string(cs.n_vars()));
  for (const Clause& clause : cs.clauses()) {
    const bool satisfied = std::any_of(clause.begin(), clause.end(), [&](const Literal& lit) {
      return v[lit.var - 1] == lit.positive;
    });
    if (!satisfied) return false;
  }
  return true;
}

namespace {

// -1 unassigned, 0 false, 1 true; index 0 unused.
using Assignment = std::vector<std::int8_t>;

class Dpll {
 public:
  explicit Dpll(const ConstraintSet& cs) : cs_(cs) {}

  bool solve(Assignment& assign) const {
    if (!propagate(assign)) return false;
    std::size_t branch_var = 0;
    for (std::size_t var = 1; var < assign.size(); ++var) {
      if (assign[var] < 0) {
        branch_var = var;
        break;
      }
    }
    if (branch_var == 0) return true;
    for (std::int8_t value : {std::int8_t{1}, std::int8_t{0}}) {
      Assignment trial = assign;
      trial[branch_var] = value;
      if (solve(trial)) return true;
    }
    return false;
  }

 private:
  // Unit propagation to a fixed point. False on a falsified clause.
  bool propagate(Assignment& assign) const {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const Clause& clause : cs_.clauses()) {
        std::size_t free_count = 0;
        const Literal* free_lit = nullptr;
        bool satisfied = false;
        for (const Literal& lit : clause) {
          const std::int8_t value = assign[lit.var];
          if (value < 0) {
            ++free_count;
            free_lit = &lit;
          } else if ((value == 1) == lit.positive) {
            satisfied = true;
            break;
          }
        }
        if (satisfied) continue;
        if (free_count == 0) return false;
        if (free_count == 1) {
          assign[free_lit->var] = free_lit->positive ? 1 : 0;
          changed = true;
        }
      }
    }
    return true;
  }

  const ConstraintSet& cs_;
};

}  // namespace

bool sat_with_prefix(const ConstraintSet& cs, const PrefixValuation& prefix) {
  require_shape(prefix.size() <= cs.n_vars(), "sat_with_prefix: prefix longer than variable count");
  Assignment assign(cs.n_vars() + 1, -1);
  for (std::size_t i = 0; i < prefix.size(); ++i) assign[i + 1] = prefix[i] ? 1 : 0;
  return Dpll(cs).solve(assign);
}

ValiditySplit split_valid_invalid(const ConstraintSet& cs, const std::vector<Valuation>& valuations) {
  ValiditySplit out;
  for (const Valuation& v : valuations) {
    (eval_full(cs, v) ? out.valid : out.invalid).push_back(v);
  }
  return out;
}

}  // namespace seqlabel

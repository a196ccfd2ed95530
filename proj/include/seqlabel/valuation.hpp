#ifndef SEQLABEL_VALUATION_HPP
#define SEQLABEL_VALUATION_HPP

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace seqlabel {

/// Truth assignment to output labels O1..Oj in model order. A full
/// valuation has j == n; shorter ones are prefix valuations.
///
/// Ordering is lexicographic with false < true, which is the tie-break
/// used by every decoder.
class Valuation {
 public:
  Valuation() = default;
  explicit Valuation(std::size_t n, bool value = false) : bits_(n, value) {}
  Valuation(std::initializer_list<bool> bits) : bits_(bits) {}
  explicit Valuation(std::vector<bool> bits) : bits_(std::move(bits)) {}

  /// Parses a bitstring such as "0110".
  static Valuation from_string(std::string_view bits);

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool value) { bits_[i] = value; }
  void push_back(bool value) { bits_.push_back(value); }
  void pop_back() { bits_.pop_back(); }

  /// Restriction to the first `length` labels.
  Valuation prefix(std::size_t length) const;
  /// Copy with one more bit appended.
  Valuation extended(bool value) const;

  std::string to_string() const;
  const std::vector<bool>& bits() const noexcept { return bits_; }

  friend bool operator==(const Valuation&, const Valuation&) = default;
  friend auto operator<=>(const Valuation& a, const Valuation& b) {
    return a.bits_ <=> b.bits_;
  }

 private:
  std::vector<bool> bits_;
};

using PrefixValuation = Valuation;

/// Per-label probabilities in model order.
using MarginalAssignment = std::vector<double>;

}  // namespace seqlabel

#endif  // SEQLABEL_VALUATION_HPP

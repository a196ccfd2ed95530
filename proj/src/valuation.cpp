#include "seqlabel/valuation.hpp"

#include "seqlabel/errors.hpp"

namespace seqlabel {

Valuation Valuation::from_string(std::string_view bits) {
  Valuation v;
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw ShapeError("valuation string may only contain '0' and '1'");
    }
    v.push_back(c == '1');
  }
  return v;
}

Valuation Valuation::prefix(std::size_t length) const {
  require_shape(length <= bits_.size(), "prefix longer than valuation");
  return Valuation(std::vector<bool>(bits_.begin(), bits_.begin() + length));
}

Valuation Valuation::extended(bool value) const {
  Valuation out = *this;
  out.push_back(value);
  return out;
}

std::string Valuation::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

}  // namespace seqlabel

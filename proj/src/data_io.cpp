#include "seqlabel/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "seqlabel/errors.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel {

namespace {

bool parse_binary_cell(std::string_view cell, bool& out) {
  const auto v = text::parse_double(cell);
  if (!v || (*v != 0.0 && *v != 1.0)) return false;
  out = (*v == 1.0);
  return true;
}

struct ArffAttribute {
  std::string name;
  bool binary = false;
};

// Splits "@attribute <name> <type>" where name may be quoted.
ArffAttribute parse_attribute(std::string_view rest, std::size_t line_no) {
  rest = text::trim(rest);
  std::string name;
  if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
    const char quote = rest.front();
    const std::size_t close = rest.find(quote, 1);
    if (close == std::string_view::npos) throw ParseError(line_no, "unterminated attribute name");
    name = std::string(rest.substr(1, close - 1));
    rest = rest.substr(close + 1);
  } else {
    const std::size_t end = rest.find_first_of(" \t");
    if (end == std::string_view::npos) throw ParseError(line_no, "attribute without a type");
    name = std::string(rest.substr(0, end));
    rest = rest.substr(end);
  }
  const std::string type = text::to_lower(text::trim(rest));
  if (type == "numeric" || type == "real" || type == "integer") return {name, false};
  if (!type.empty() && type.front() == '{' && type.back() == '}') {
    std::vector<std::string> values;
    for (std::string_view v : text::split(std::string_view(type).substr(1, type.size() - 2), ',')) {
      values.emplace_back(text::trim(v));
    }
    std::sort(values.begin(), values.end());
    if (values == std::vector<std::string>{"0", "1"}) return {name, true};
  }
  throw ParseError(line_no, "unsupported attribute type '" + type + "' for " + name);
}

}  // namespace

TabularDataset parse_arff_lite(std::string_view text_in, const LabelSelection& selection) {
  const auto all_lines = text::lines(text_in);
  std::vector<ArffAttribute> attributes;
  bool in_data = false;
  std::vector<std::size_t> label_idx;
  std::vector<bool> is_label;
  TabularDataset out;

  const auto resolve_labels = [&](std::size_t line_no) {
    is_label.assign(attributes.size(), false);
    if (!selection.names.empty()) {
      for (const std::string& name : selection.names) {
        const auto it = std::find_if(attributes.begin(), attributes.end(),
                                     [&](const ArffAttribute& a) { return a.name == name; });
        if (it == attributes.end()) throw ParseError(line_no, "label attribute '" + name + "' not declared");
        const auto idx = static_cast<std::size_t>(it - attributes.begin());
        if (is_label[idx]) throw ParseError(line_no, "label '" + name + "' listed twice");
        is_label[idx] = true;
        label_idx.push_back(idx);
      }
    } else {
      if (selection.last_count == 0 || selection.last_count >= attributes.size()) {
        throw ParseError(line_no, "label count must be between 1 and the attribute count - 1");
      }
      for (std::size_t i = attributes.size() - selection.last_count; i < attributes.size(); ++i) {
        is_label[i] = true;
        label_idx.push_back(i);
      }
    }
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (!is_label[i]) out.feature_names.push_back(attributes[i].name);
    }
    for (std::size_t idx : label_idx) out.label_names.push_back(attributes[idx].name);
  };

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = text::trim(all_lines[i]);
    if (line.empty() || line.front() == '%') continue;

    if (!in_data) {
      if (line.front() != '@') throw ParseError(line_no, "expected a header declaration");
      const std::size_t end = line.find_first_of(" \t");
      const std::string keyword = text::to_lower(line.substr(0, end));
      const std::string_view rest = end == std::string_view::npos ? "" : line.substr(end);
      if (keyword == "@relation") continue;
      if (keyword == "@attribute") {
        attributes.push_back(parse_attribute(rest, line_no));
        continue;
      }
      if (keyword == "@data") {
        if (attributes.empty()) throw ParseError(line_no, "@data before any @attribute");
        resolve_labels(line_no);
        in_data = true;
        continue;
      }
      throw ParseError(line_no, "unknown declaration " + keyword);
    }

    if (line.front() == '{') throw ParseError(line_no, "sparse ARFF rows are not supported");
    const auto cells = text::split(line, ',');
    if (cells.size() != attributes.size()) {
      throw ParseError(line_no, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(attributes.size()));
    }
    Row row;
    row.labels = Valuation(label_idx.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_label[c]) continue;
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(line_no, "non-numeric cell '" + std::string(text::trim(cells[c])) + "'");
      if (attributes[c].binary && *v != 0.0 && *v != 1.0) {
        throw ParseError(line_no, "value outside {0,1} for " + attributes[c].name);
      }
      row.features.push_back(*v);
    }
    for (std::size_t l = 0; l < label_idx.size(); ++l) {
      bool bit = false;
      if (!parse_binary_cell(cells[label_idx[l]], bit)) {
        throw ParseError(line_no, "label " + attributes[label_idx[l]].name + " must be 0 or 1, got '" +
                                      std::string(text::trim(cells[label_idx[l]])) + "'");
      }
      row.labels.set(l, bit);
    }
    out.rows.push_back(std::move(row));
  }
  if (!in_data) throw ParseError(0, "missing @data section");
  return out;
}

TabularDataset parse_csv_dataset(std::string_view text_in, std::size_t label_count) {
  const auto all_lines = text::lines(text_in);
  if (all_lines.empty()) throw ParseError(0, "empty CSV: header row required");
  const auto header = text::split(all_lines[0], ',');
  if (label_count == 0 || label_count >= header.size()) {
    throw ParseError(1, "label count " + std::to_string(label_count) +
                            " must be between 1 and the column count - 1 (" +
                            std::to_string(header.size() - 1) + ")");
  }
  const std::size_t m = header.size() - label_count;
  TabularDataset out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    (c < m ? out.feature_names : out.label_names).emplace_back(text::trim(header[c]));
  }
  for (std::size_t i = 1; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(all_lines[i]).empty()) continue;
    const auto cells = text::split(all_lines[i], ',');
    if (cells.size() != header.size()) {
      throw ParseError(line_no, "ragged row: " + std::to_string(cells.size()) + " cells, header has " +
                                    std::to_string(header.size()));
    }
    Row row;
    row.features.reserve(m);
    row.labels = Valuation(label_count);
    for (std::size_t c = 0; c < m; ++c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(line_no, "non-numeric cell '" + std::string(text::trim(cells[c])) + "'");
      row.features.push_back(*v);
    }
    for (std::size_t l = 0; l < label_count; ++l) {
      bool bit = false;
      if (!parse_binary_cell(cells[m + l], bit)) {
        throw ParseError(line_no, "label cell must be 0 or 1, got '" +
                                      std::string(text::trim(cells[m + l])) + "'");
      }
      row.labels.set(l, bit);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string write_csv(const TabularDataset& data) {
  std::ostringstream out;
  bool first = true;
  for (const auto* names : {&data.feature_names, &data.label_names}) {
    for (const std::string& name : *names) {
      out << (first ? "" : ",") << name;
      first = false;
    }
  }
  out << '\n';
  for (const Row& row : data.rows) {
    for (std::size_t c = 0; c < row.features.size(); ++c) {
      out << (c ? "," : "") << text::format_double(row.features[c]);
    }
    for (std::size_t l = 0; l < row.labels.size(); ++l) out << ',' << (row.labels[l] ? '1' : '0');
    out << '\n';
  }
  return out.str();
}

TabularDataset load_dataset(const std::string& path, std::size_t label_count) {
  const std::string content = text::read_file(path);
  const std::string lower = text::to_lower(path);
  if (lower.size() >= 5 && lower.ends_with(".arff")) {
    return parse_arff_lite(content, LabelSelection{{}, label_count});
  }
  return parse_csv_dataset(content, label_count);
}

ConstraintSet load_constraints(const std::string& path) {
  return parse_dimacs(text::read_file(path));
}

std::string_view to_string(ToyScenario scenario) {
  switch (scenario) {
    case ToyScenario::complete_overlap: return "complete_overlap";
    case ToyScenario::partial_overlap: return "partial_overlap";
    case ToyScenario::disjoint: return "disjoint";
  }
  return "unknown";
}

ToyScenario parse_scenario(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "complete_overlap" || key == "complete") return ToyScenario::complete_overlap;
  if (key == "partial_overlap" || key == "partial") return ToyScenario::partial_overlap;
  if (key == "disjoint") return ToyScenario::disjoint;
  throw std::invalid_argument("unknown toy scenario '" + std::string(name) + "'");
}

ToySpec ToySpec::make(ToyScenario scenario, std::size_t n_samples, std::uint64_t seed) {
  ToySpec spec;
  spec.n_samples = n_samples;
  spec.scenario = scenario;
  spec.seed = seed;
  switch (scenario) {
    case ToyScenario::complete_overlap:
      spec.rect1 = {0.25, 0.75, 0.25, 0.75};
      spec.rect2 = spec.rect1;
      break;
    case ToyScenario::partial_overlap:
      spec.rect1 = {0.1, 0.6, 0.2, 0.7};
      spec.rect2 = {0.35, 0.9, 0.3, 0.8};
      break;
    case ToyScenario::disjoint:
      spec.rect1 = {0.05, 0.45, 0.05, 0.45};
      spec.rect2 = {0.55, 0.95, 0.55, 0.95};
      break;
  }
  return spec;
}

void ToySpec::validate() const {
  if (n_samples == 0) throw std::invalid_argument("toy dataset needs at least one sample");
  for (const Rect* r : {&rect1, &rect2}) {
    if (!(r->x_min >= 0.0 && r->x_min < r->x_max && r->x_max <= 1.0 && r->y_min >= 0.0 &&
          r->y_min < r->y_max && r->y_max <= 1.0)) {
      throw std::invalid_argument("toy rectangles must be non-degenerate and inside [0,1]^2");
    }
  }
  const bool equal = rect1.x_min == rect2.x_min && rect1.x_max == rect2.x_max &&
                     rect1.y_min == rect2.y_min && rect1.y_max == rect2.y_max;
  const bool intersect = rect1.x_min < rect2.x_max && rect2.x_min < rect1.x_max &&
                         rect1.y_min < rect2.y_max && rect2.y_min < rect1.y_max;
  const bool touching = rect1.x_min <= rect2.x_max && rect2.x_min <= rect1.x_max &&
                        rect1.y_min <= rect2.y_max && rect2.y_min <= rect1.y_max;
  bool consistent = false;
  switch (scenario) {
    case ToyScenario::complete_overlap: consistent = equal; break;
    case ToyScenario::partial_overlap: consistent = intersect && !equal; break;
    case ToyScenario::disjoint: consistent = !touching; break;
  }
  if (!consistent) {
    throw std::invalid_argument("rectangles do not match scenario " + std::string(to_string(scenario)));
  }
}

ToyData gen_toy(const ToySpec& spec) {
  spec.validate();
  ToyData out;
  out.data.feature_names = {"x1", "x2"};
  out.data.label_names = {"O1", "O2"};
  out.data.rows.reserve(spec.n_samples);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const double x = unit(rng);
    const double y = unit(rng);
    out.data.rows.push_back({{x, y}, Valuation{spec.rect1.contains(x, y), spec.rect2.contains(x, y)}});
  }
  out.constraints = ConstraintSet(2, {{{1, false}, {2, true}}});
  return out;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

TabularDataset take(const TabularDataset& data, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t end) {
  TabularDataset out;
  out.feature_names = data.feature_names;
  out.label_names = data.label_names;
  out.rows.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.rows.push_back(data.rows[idx[i]]);
  return out;
}

// Guards against 0.35 * 10000 landing just under 3500.
std::size_t floor_share(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

}  // namespace

DatasetSplit split(const TabularDataset& data, double train_frac, double valid_frac,
                   double test_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && valid_frac > 0.0 && test_frac > 0.0)) {
    throw std::invalid_argument("split fractions must all be positive");
  }
  if (std::abs(train_frac + valid_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const std::size_t total = data.size();
  const std::size_t n_train = floor_share(train_frac, total);
  const std::size_t n_valid = floor_share(valid_frac, total);
  if (total >= 3 && (n_train == 0 || n_valid == 0 || n_train + n_valid == total)) {
    throw std::invalid_argument("split of " + std::to_string(total) +
                                " rows leaves an empty part; adjust the fractions");
  }
  const auto idx = shuffled_indices(total, seed);
  return {take(data, idx, 0, n_train), take(data, idx, n_train, n_train + n_valid),
          take(data, idx, n_train + n_valid, total)};
}

SupervisionSplit split_supervision(const TabularDataset& train, double unsupervised_ratio,
                                   std::uint64_t seed) {
  if (!(unsupervised_ratio >= 0.0 && unsupervised_ratio <= 1.0)) {
    throw std::invalid_argument("unsupervised ratio must be in [0, 1]");
  }
  const std::size_t total = train.size();
  const std::size_t n_unsup = floor_share(unsupervised_ratio, total);
  const auto idx = shuffled_indices(total, seed);
  std::vector<bool> unsupervised(total, false);
  for (std::size_t i = 0; i < n_unsup; ++i) unsupervised[idx[i]] = true;
  // Both parts keep the original row order, so ratio 0 leaves the training
  // set untouched.
  std::vector<std::size_t> sup_idx;
  std::vector<std::size_t> unsup_idx;
  for (std::size_t i = 0; i < total; ++i) (unsupervised[i] ? unsup_idx : sup_idx).push_back(i);
  return {take(train, sup_idx, 0, sup_idx.size()), take(train, unsup_idx, 0, unsup_idx.size())};
}

}  // namespace seqlabel

#ifndef SEQLABEL_DATA_IO_HPP
#define SEQLABEL_DATA_IO_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "seqlabel/constraints.hpp"
#include "seqlabel/valuation.hpp"

namespace seqlabel {

struct Row {
  std::vector<double> features;
  Valuation labels;  // dataset column order

  friend bool operator==(const Row&, const Row&) = default;
};

struct TabularDataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<Row> rows;

  std::size_t m() const { return feature_names.size(); }
  std::size_t n() const { return label_names.size(); }
  std::size_t size() const { return rows.size(); }

  friend bool operator==(const TabularDataset&, const TabularDataset&) = default;
};

/// Which attributes of an ARFF file are labels: an explicit name list, or
/// the last `last_count` attributes.
struct LabelSelection {
  std::vector<std::string> names;
  std::size_t last_count = 0;
};

/// Dense ARFF subset: @relation, @attribute <name> numeric|real|integer|{0,1},
/// @data, comma-separated rows, `%` comments, case-insensitive keywords.
/// Sparse rows, missing values and non-binary label cells are errors.
TabularDataset parse_arff_lite(std::string_view text, const LabelSelection& labels);

/// Header row, all cells numeric, final `label_count` columns in {0,1}.
TabularDataset parse_csv_dataset(std::string_view text, std::size_t label_count);
std::string write_csv(const TabularDataset& data);

/// Reads a .csv or .arff file (by extension); ARFF labels are the last
/// `label_count` attributes.
TabularDataset load_dataset(const std::string& path, std::size_t label_count);
ConstraintSet load_constraints(const std::string& path);

struct Rect {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
};

enum class ToyScenario { complete_overlap, partial_overlap, disjoint };

std::string_view to_string(ToyScenario scenario);
/// Accepts "complete_overlap"/"complete-overlap" etc. Throws std::invalid_argument.
ToyScenario parse_scenario(std::string_view name);

/// Two-feature, two-label synthetic task: O1 = x in rect1, O2 = x in rect2,
/// features uniform on the unit square.
struct ToySpec {
  std::size_t n_samples = 10000;
  ToyScenario scenario = ToyScenario::complete_overlap;
  Rect rect1;
  Rect rect2;
  std::uint64_t seed = 0;

  /// Default rectangles for each scenario.
  static ToySpec make(ToyScenario scenario, std::size_t n_samples, std::uint64_t seed);
  /// Rectangles inside the unit square and related as the scenario says.
  void validate() const;
};

struct ToyData {
  TabularDataset data;
  ConstraintSet constraints;  // O1 => O2
};

ToyData gen_toy(const ToySpec& spec);

struct DatasetSplit {
  TabularDataset train;
  TabularDataset validation;
  TabularDataset test;
};

/// Seeded shuffle then contiguous slices. Train and validation sizes are
/// floor(fraction * size); the remainder goes to test.
DatasetSplit split(const TabularDataset& data, double train_frac, double valid_frac,
                   double test_frac, std::uint64_t seed);

struct SupervisionSplit {
  TabularDataset supervised;
  TabularDataset unsupervised;
};

/// Moves floor(ratio * size) seeded-random rows into the unsupervised part.
SupervisionSplit split_supervision(const TabularDataset& train, double unsupervised_ratio,
                                   std::uint64_t seed);

}  // namespace seqlabel

#endif  // SEQLABEL_DATA_IO_HPP

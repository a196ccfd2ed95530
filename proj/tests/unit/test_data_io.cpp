#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "seqlabel/data_io.hpp"
#include "seqlabel/errors.hpp"
#include "seqlabel/text.hpp"

using namespace seqlabel;

namespace {

const char* kArff =
    "% small multi-label file\n"
    "@relation 'demo set'\n"
    "@attribute f1 numeric\n"
    "@attribute 'f two' REAL\n"
    "@attribute lab1 {0,1}\n"
    "@attribute lab2 {0,1}\n"
    "@data\n"
    "0.5,1.5,1,0\n"
    "% comment inside data\n"
    "-2,3,0,1\n";

std::size_t arff_error_line(std::string_view text, std::size_t labels = 1) {
  try {
    parse_arff_lite(text, {{}, labels});
  } catch (const ParseError& e) {
    return e.line();
  }
  return 9999;
}

}  // namespace

TEST_SUITE("data_io") {

TEST_CASE("ARFF with trailing labels") {
  const TabularDataset d = parse_arff_lite(kArff, {{}, 2});
  CHECK(d.feature_names == std::vector<std::string>{"f1", "f two"});
  CHECK(d.label_names == std::vector<std::string>{"lab1", "lab2"});
  REQUIRE(d.size() == 2);
  CHECK(d.rows[0].features == std::vector<double>{0.5, 1.5});
  CHECK(d.rows[0].labels == Valuation{true, false});
  CHECK(d.rows[1].labels == Valuation{false, true});
}

TEST_CASE("ARFF labels chosen by name") {
  const TabularDataset d = parse_arff_lite(kArff, {{"lab2"}, 0});
  CHECK(d.label_names == std::vector<std::string>{"lab2"});
  CHECK(d.m() == 3);
  CHECK(d.rows[1].features == std::vector<double>{-2.0, 3.0, 0.0});
}

TEST_CASE("ARFF errors name their line") {
  CHECK(arff_error_line("@relation r\n@attribute a numeric\n@attribute b {0,1}\n@data\n{0 1}\n") == 5);
  CHECK(arff_error_line("@relation r\n@attribute a numeric\n@attribute b {0,1}\n@data\n1,2\n") == 5);
  CHECK(arff_error_line("@relation r\n@attribute a numeric\n@attribute b {0,1}\n@data\n1\n") == 5);
  CHECK(arff_error_line("@relation r\n@attribute a string\n") == 2);
  CHECK(arff_error_line("@relation r\n@attribute a numeric\n@attribute b {0,1}\n@data\nx,1\n") == 5);
  CHECK_THROWS_AS(parse_arff_lite("@relation r\n@attribute a numeric\n", {{}, 1}), ParseError);
}

TEST_CASE("CSV parsing and writing round trip") {
  const std::string text = "x1,x2,A,B\n0.25,1e-3,1,0\n-1,2,0,0\n";
  const TabularDataset d = parse_csv_dataset(text, 2);
  CHECK(d.feature_names == std::vector<std::string>{"x1", "x2"});
  CHECK(d.rows[0].features == std::vector<double>{0.25, 0.001});
  CHECK(d.rows[1].labels == Valuation{false, false});
  CHECK(parse_csv_dataset(write_csv(d), 2) == d);
}

TEST_CASE("CSV errors") {
  CHECK_THROWS_AS(parse_csv_dataset("", 1), ParseError);
  CHECK_THROWS_AS(parse_csv_dataset("a,b\n1,2\n", 2), ParseError);
  try {
    parse_csv_dataset("a,b\n1,0\n1\n", 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_csv_dataset("a,b\n1,2\n", 1), ParseError);
  CHECK_THROWS_AS(parse_csv_dataset("a,b\nq,1\n", 1), ParseError);
}

TEST_CASE("loading by extension") {
  const auto dir = std::filesystem::temp_directory_path() / "seqlabel_unit_io";
  std::filesystem::create_directories(dir);
  text::write_file((dir / "d.arff").string(), kArff);
  text::write_file((dir / "d.csv").string(), "a,L\n1,1\n");
  text::write_file((dir / "c.cnf").string(), "p cnf 2 1\n-1 2 0\n");
  CHECK(load_dataset((dir / "d.arff").string(), 2).size() == 2);
  CHECK(load_dataset((dir / "d.csv").string(), 1).n() == 1);
  CHECK(load_constraints((dir / "c.cnf").string()).n_vars() == 2);
  CHECK_THROWS(load_dataset((dir / "missing.csv").string(), 1));
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario names") {
  CHECK(parse_scenario("disjoint") == ToyScenario::disjoint);
  CHECK(parse_scenario("partial-overlap") == ToyScenario::partial_overlap);
  CHECK(to_string(ToyScenario::complete_overlap) == "complete_overlap");
  CHECK_THROWS_AS(parse_scenario("sideways"), std::invalid_argument);
}

TEST_CASE("toy data follows the rectangles and is seeded") {
  const ToySpec spec = ToySpec::make(ToyScenario::partial_overlap, 500, 3);
  const ToyData a = gen_toy(spec);
  const ToyData b = gen_toy(spec);
  CHECK(a.data == b.data);
  CHECK(a.constraints == ConstraintSet(2, {{{1, false}, {2, true}}}));
  for (const Row& r : a.data.rows) {
    REQUIRE(r.features.size() == 2);
    CHECK(r.features[0] >= 0.0);
    CHECK(r.features[0] <= 1.0);
    CHECK(r.labels[0] == spec.rect1.contains(r.features[0], r.features[1]));
    CHECK(r.labels[1] == spec.rect2.contains(r.features[0], r.features[1]));
  }
  CHECK_FALSE(gen_toy(ToySpec::make(ToyScenario::partial_overlap, 500, 4)).data == a.data);
}

TEST_CASE("toy label frequencies match rectangle areas within 3 sigma") {
  for (ToyScenario s : {ToyScenario::complete_overlap, ToyScenario::partial_overlap, ToyScenario::disjoint}) {
    const ToySpec spec = ToySpec::make(s, 10000, 17);
    const ToyData toy = gen_toy(spec);
    for (int label = 0; label < 2; ++label) {
      const double area = label == 0 ? spec.rect1.area() : spec.rect2.area();
      std::size_t hits = 0;
      for (const Row& r : toy.data.rows) hits += r.labels[label] ? 1 : 0;
      const double freq = static_cast<double>(hits) / 10000.0;
      CHECK(std::abs(freq - area) <= 3.0 * std::sqrt(area * (1.0 - area) / 10000.0));
    }
  }
}

TEST_CASE("scenario geometry is validated") {
  ToySpec spec = ToySpec::make(ToyScenario::disjoint, 10, 1);
  CHECK_NOTHROW(spec.validate());
  spec.rect2 = spec.rect1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  ToySpec outside = ToySpec::make(ToyScenario::complete_overlap, 10, 1);
  outside.rect1.x_max = 1.5;
  CHECK_THROWS_AS(outside.validate(), std::invalid_argument);
}

TEST_CASE("split sizes, disjointness and determinism") {
  const TabularDataset data = gen_toy(ToySpec::make(ToyScenario::disjoint, 10000, 2)).data;
  const DatasetSplit s = split(data, 0.35, 0.15, 0.5, 8);
  CHECK(s.train.size() == 3500);
  CHECK(s.validation.size() == 1500);
  CHECK(s.test.size() == 5000);
  std::set<std::vector<double>> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const Row& r : part->rows) seen.insert(r.features);
  }
  CHECK(seen.size() == 10000);
  CHECK(split(data, 0.35, 0.15, 0.5, 8).train == s.train);
  CHECK_FALSE(split(data, 0.35, 0.15, 0.5, 9).train == s.train);
}

TEST_CASE("split rejects bad fractions") {
  const TabularDataset data = gen_toy(ToySpec::make(ToyScenario::disjoint, 20, 2)).data;
  CHECK_THROWS_AS(split(data, 0.5, 0.5, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(data, 0.0, 0.5, 0.5, 1), std::invalid_argument);
  const TabularDataset tiny = gen_toy(ToySpec::make(ToyScenario::disjoint, 4, 2)).data;
  CHECK_THROWS_AS(split(tiny, 0.1, 0.1, 0.8, 1), std::invalid_argument);
}

TEST_CASE("supervision split sizes and order") {
  const TabularDataset data = gen_toy(ToySpec::make(ToyScenario::disjoint, 100, 2)).data;
  const SupervisionSplit none = split_supervision(data, 0.0, 1);
  CHECK(none.supervised == data);
  CHECK(none.unsupervised.size() == 0);
  const SupervisionSplit half = split_supervision(data, 0.37, 1);
  CHECK(half.unsupervised.size() == 37);
  CHECK(half.supervised.size() == 63);
  CHECK_THROWS_AS(split_supervision(data, 1.5, 1), std::invalid_argument);
}

}  // TEST_SUITE

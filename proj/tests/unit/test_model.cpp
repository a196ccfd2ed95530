#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "seqlabel/errors.hpp"
#include "seqlabel/model.hpp"

using namespace seqlabel;

namespace {

// Conditionals looked up from a table keyed by prefix.
struct TableDist : SequentialDistribution {
  std::size_t n;
  std::map<std::string, double> table;
  TableDist(std::size_t n_, std::map<std::string, double> t) : n(n_), table(std::move(t)) {}
  std::size_t n_labels() const override { return n; }
  double conditional(const PrefixValuation& p) const override { return table.at(p.to_string()); }
};

BaseSeqModel seeded_base_seq(std::size_t m, std::size_t n, std::uint64_t seed,
                             std::vector<std::size_t> order = {}) {
  if (order.empty()) order = identity_order(n);
  BaseSeqModel model = BaseSeqModel::create(m, n, {6}, {10, 7}, order, seed);
  model.base = oracle::random_net(model.base.layer_sizes(), seed + 11);
  model.cond = oracle::random_net(model.cond.layer_sizes(), seed + 12, 0.5);
  return model;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("all-zero base net gives one half for every label") {
  BaseSeqModel model = BaseSeqModel::create(3, 4, {5}, {6}, identity_order(4), 1);
  model.base = nnet::DenseNet(model.base.layer_sizes());
  CHECK(base_predict(model, std::vector<double>{0.3, 0.1, 0.9}) == MarginalAssignment(4, 0.5));
}

TEST_CASE("base_predict with identity order is the base forward pass") {
  const BaseSeqModel model = seeded_base_seq(3, 4, 2);
  const std::vector<double> x{0.2, -0.4, 1.0};
  CHECK(base_predict(model, x) == nnet::forward(model.base, x));
}

TEST_CASE("reversed label order reverses the base marginals") {
  const BaseSeqModel plain = seeded_base_seq(3, 4, 3);
  BaseSeqModel rev = plain;
  rev.label_order = reversed_order(4);
  const std::vector<double> x{0.5, 0.1, -0.3};
  MarginalAssignment want = base_predict(plain, x);
  std::reverse(want.begin(), want.end());
  CHECK(base_predict(rev, x) == want);
}

TEST_CASE("conditional input encoding layout") {
  CHECK(encode_cond_input({0.7, 0.6}, {}) == std::vector<double>{0.7, 0.6, 0, 0, 0, 0});
  CHECK(encode_cond_input({0.7, 0.6}, {true}) == std::vector<double>{0.7, 0.6, 1, 0, 1, 0});
  const auto e = encode_cond_input({0.1, 0.2, 0.3}, {false, true});
  CHECK(std::vector<double>(e.begin() + 3, e.end()) == std::vector<double>{0, 1, 0, 1, 1, 0});
  CHECK(encode_context_prefix(std::vector<double>{0.2, 0.9}, {true}, 2) ==
        std::vector<double>{0.2, 0.9, 1, 0, 1, 0});
  CHECK_THROWS_AS(encode_cond_input({0.5}, {true, false}), ShapeError);
}

TEST_CASE("all-zero conditional net gives one half") {
  BaseSeqModel model = BaseSeqModel::create(2, 3, {4}, {5}, identity_order(3), 1);
  model.cond = nnet::DenseNet(model.cond.layer_sizes());
  CHECK(cond_predict(model, {0.2, 0.3, 0.9}, {true}) == 0.5);
  CHECK(joint_logprob_seq(model, {0.2, 0.3, 0.9}, {true, false, true}) ==
        doctest::Approx(3.0 * std::log(0.5)));
}

TEST_CASE("cond_predict matches a matrix-arithmetic oracle and is pure") {
  oracle::Rng rng(4);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const BaseSeqModel model = seeded_base_seq(2, 4, 100 + s);
    const auto pa = oracle::random_vector(rng, 4, 0.0, 1.0);
    const Valuation prefix = oracle::random_valuation(rng, s % 4);
    std::vector<double> input(pa);
    for (std::size_t i = 0; i < 4; ++i) input.push_back(i < prefix.size() && prefix[i] ? 1.0 : 0.0);
    for (std::size_t i = 0; i < 4; ++i) input.push_back(i < prefix.size() ? 1.0 : 0.0);
    const double want = oracle::naive_forward(model.cond, input)[0];
    const double got = cond_predict(model, pa, prefix);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(cond_predict(model, pa, prefix) == got);
  }
}

TEST_CASE("conditional on a full-length prefix is a contract error") {
  const BaseSeqModel model = seeded_base_seq(2, 2, 5);
  const ConditionalNet dist = sequential_for(model, std::vector<double>{0.1, 0.2});
  CHECK_THROWS_AS(dist.conditional({true, false}), ContractError);
}

TEST_CASE("chain of 0.9 then 0.4 gives prefix probability 0.36") {
  const TableDist dist(2, {{"", 0.9}, {"1", 0.6}, {"0", 0.5}});
  CHECK(std::exp(joint_logprob(dist, {true, false})) == doctest::Approx(0.36).epsilon(1e-12));
}

TEST_CASE("independence product examples") {
  CHECK(joint_prob_base({0.7, 0.6}, {true, false}) == doctest::Approx(0.28));
  CHECK(joint_prob_base({0.5, 0.5, 0.5}, {true, false, true}) == doctest::Approx(0.125));
  CHECK(joint_prob_base({1.0, 0.0}, {true, false}) == 1.0);
}

TEST_CASE("summed logs equal the direct product of conditionals") {
  oracle::Rng rng(6);
  const BaseSeqModel model = seeded_base_seq(3, 10, 7);
  const auto x = oracle::random_vector(rng, 3, -1.0, 1.0);
  const ConditionalNet dist = sequential_for(model, x);
  for (int i = 0; i < 50; ++i) {
    const Valuation v = oracle::random_valuation(rng, 10);
    CHECK(std::exp(joint_logprob(dist, v)) ==
          doctest::Approx(oracle::product_prob(dist, v)).epsilon(1e-10));
  }
}

TEST_CASE("both joints are normalized for every n up to 12") {
  oracle::Rng rng(8);
  for (std::size_t n = 1; n <= 12; ++n) {
    const BaseSeqModel model = seeded_base_seq(2, n, 200 + n);
    const auto x = oracle::random_vector(rng, 2, -1.0, 1.0);
    const MarginalAssignment pa = base_predict(model, x);
    double seq = 0.0, base = 0.0;
    for (const Valuation& v : oracle::all_valuations(n)) {
      seq += std::exp(joint_logprob_seq(model, pa, v));
      base += joint_prob_base(pa, v);
    }
    CHECK(std::abs(seq - 1.0) < 1e-9);
    CHECK(std::abs(base - 1.0) < 1e-9);
  }
}

TEST_CASE("seq-only model is normalized and encodes raw features") {
  oracle::Rng rng(9);
  SeqOnlyModel model = SeqOnlyModel::create(2, 3, {6}, identity_order(3), 3);
  model.cond = oracle::random_net(model.cond.layer_sizes(), 31, 0.5);
  const std::vector<double> x{0.2, 0.9};
  double total = 0.0;
  const ConditionalNet dist = sequential_for(model, x);
  for (const Valuation& v : oracle::all_valuations(3)) total += std::exp(joint_logprob(dist, v));
  CHECK(std::abs(total - 1.0) < 1e-9);
  const std::vector<double> enc{0.2, 0.9, 1, 0, 0, 1, 0, 0};
  CHECK(seq_only_cond_predict(model, x, {true}) == oracle::naive_forward(model.cond, enc)[0]);

  SeqOnlyModel zero = SeqOnlyModel::create(2, 3, {6}, identity_order(3), 3);
  zero.cond = nnet::DenseNet(zero.cond.layer_sizes());
  CHECK(seq_only_cond_predict(zero, x, {}) == 0.5);
}

TEST_CASE("log-probability never increases as a prefix extends") {
  oracle::Rng rng(10);
  const BaseSeqModel model = seeded_base_seq(2, 8, 17);
  const ConditionalNet dist = sequential_for(model, std::vector<double>{0.3, 0.6});
  for (int i = 0; i < 30; ++i) {
    const Valuation v = oracle::random_valuation(rng, 8);
    double acc = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      const double next = acc + step_log_term(dist.conditional(v.prefix(j)), v[j]);
      CHECK(next <= acc);
      acc = next;
    }
    CHECK(acc == joint_logprob(dist, v));
  }
}

TEST_CASE("clamping bounds each step") {
  CHECK(step_probability(1.0, false) == kProbEpsilon);
  CHECK(step_probability(0.0, false) == 1.0 - kProbEpsilon);
  CHECK(step_probability(0.3, true) == 0.3);
  CHECK(step_log_term(0.0, true) == doctest::Approx(std::log(kProbEpsilon)));
}

TEST_CASE("label order helpers") {
  CHECK(identity_order(3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(reversed_order(3) == std::vector<std::size_t>{2, 1, 0});
  CHECK_THROWS_AS(check_permutation({0, 0, 1}, 3), ShapeError);
  CHECK_THROWS_AS(check_permutation({0, 1}, 3), ShapeError);
  const std::vector<std::size_t> order{2, 0, 1};
  const Valuation col{true, false, false};
  const Valuation model = to_model_order(col, order);
  CHECK(model == Valuation{false, true, false});
  CHECK(to_column_order(model, order) == col);
}

TEST_CASE("permuting the label order keeps the joint normalized") {
  oracle::Rng rng(12);
  const BaseSeqModel model = seeded_base_seq(2, 4, 41, {3, 1, 0, 2});
  const MarginalAssignment pa = base_predict(model, std::vector<double>{0.4, 0.8});
  double total = 0.0;
  for (const Valuation& v : oracle::all_valuations(4)) total += std::exp(joint_logprob_seq(model, pa, v));
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("create validates shapes") {
  CHECK_THROWS_AS(BaseSeqModel::create(2, 3, {4}, {4}, {0, 1}, 1), ShapeError);
  BaseSeqModel model = BaseSeqModel::create(2, 3, {4}, {4}, identity_order(3), 1);
  model.cond = nnet::DenseNet({5, 1});
  CHECK_THROWS_AS(model.validate(), ShapeError);
}

TEST_CASE("bundle round trip for both architectures") {
  const BaseSeqModel bs = seeded_base_seq(3, 4, 51, {1, 0, 3, 2});
  std::stringstream a;
  save_bundle({bs, 77}, a);
  const ModelBundle back = load_bundle(a);
  CHECK(back.seed == 77);
  REQUIRE(std::holds_alternative<BaseSeqModel>(back.model));
  const auto& got = std::get<BaseSeqModel>(back.model);
  CHECK(got.base == bs.base);
  CHECK(got.cond == bs.cond);
  CHECK(got.label_order == bs.label_order);
  CHECK(a.str().find("label_order 2 1 4 3") != std::string::npos);

  SeqOnlyModel so = SeqOnlyModel::create(2, 2, {3}, reversed_order(2), 4);
  std::stringstream b;
  save_bundle({so, 5}, b);
  const ModelBundle back2 = load_bundle(b);
  REQUIRE(std::holds_alternative<SeqOnlyModel>(back2.model));
  CHECK(std::get<SeqOnlyModel>(back2.model).cond == so.cond);
  CHECK(label_order(back2.model) == reversed_order(2));
}

TEST_CASE("malformed bundles are parse errors") {
  std::istringstream junk("hello\n");
  CHECK_THROWS_AS(load_bundle(junk), ParseError);
  std::istringstream kind("SEQLABEL-BUNDLE-1\nkind other\n");
  CHECK_THROWS_AS(load_bundle(kind), ParseError);
}

}  // TEST_SUITE

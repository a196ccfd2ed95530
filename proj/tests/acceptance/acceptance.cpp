// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seqlabel/constraints.hpp"
#include "seqlabel/data_io.hpp"
#include "seqlabel/inference.hpp"
#include "seqlabel/losses.hpp"
#include "seqlabel/model.hpp"
#include "seqlabel/pipeline.hpp"
#include "seqlabel/text.hpp"

using namespace seqlabel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

BaseSeqModel random_base_seq(std::size_t m, std::size_t n, std::uint64_t seed) {
  BaseSeqModel model = BaseSeqModel::create(m, n, {8}, {12, 12}, identity_order(n), seed);
  model.base = oracle::random_net(model.base.layer_sizes(), seed * 3 + 1);
  model.cond = oracle::random_net(model.cond.layer_sizes(), seed * 3 + 2, 0.5);
  return model;
}

// 1. The sequential model defines a normalized distribution.
Outcome normalization() {
  oracle::Rng rng(101);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::size_t n = 2 + i % 11;
    const BaseSeqModel model = random_base_seq(3, n, 1000 + i);
    const auto x = oracle::random_vector(rng, 3, -1.0, 1.0);
    const MarginalAssignment pa = base_predict(model, x);
    double total = 0.0;
    for (const Valuation& v : oracle::all_valuations(n)) total += std::exp(joint_logprob_seq(model, pa, v));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst < 1e-9, "max |sum - 1| = " + fmt(worst) + " over 50 models, n in 2..12"};
}

// 2. Beam search with k = 2^n returns the exact top-k list.
Outcome beam_equals_exact() {
  oracle::Rng rng(202);
  std::size_t cases = 0;
  double worst = 0.0;
  bool same = true;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const std::size_t n = 1 + i % 10;
    const BaseSeqModel model = random_base_seq(3, n, 2000 + i);
    const auto x = oracle::random_vector(rng, 3, -1.0, 1.0);
    const ConditionalNet dist = sequential_for(model, x);
    const std::size_t k = std::size_t{1} << n;
    const auto beam = beam_search(dist, k);
    const auto exact = exact_topk(dist, k);
    ++cases;
    if (beam.size() != exact.size()) {
      same = false;
      continue;
    }
    for (std::size_t r = 0; r < beam.size(); ++r) {
      if (beam[r].valuation != exact[r].valuation) same = false;
      worst = std::max(worst, std::abs(beam[r].logp - exact[r].logp));
    }
  }
  return {same && worst <= 1e-12, std::to_string(cases) + " models n in 1..10, identical lists: " +
                                      (same ? "yes" : "no") + ", max |dlogp| = " + fmt(worst)};
}

// 3. Analytic gradients agree with central differences.
Outcome gradients() {
  oracle::Rng rng(303);
  double worst_bce = 0.0, worst_sup = 0.0, worst_cons = 0.0;
  const std::size_t instances = 25;
  for (std::uint64_t i = 0; i < instances; ++i) {
    const std::size_t n = 2 + i % 4;
    const auto pa = oracle::random_vector(rng, n, 0.05, 0.95);
    const Valuation target = oracle::random_valuation(rng, n);
    const BceResult bce = base_bce_loss(pa, target);
    const auto fd_bce = oracle::fd_gradient(pa, [&](const std::vector<double>& p) {
      return base_bce_loss(p, target).loss;
    });
    worst_bce = std::max(worst_bce, oracle::relative_error(bce.grad, fd_bce));

    const auto context = oracle::random_vector(rng, n, 0.0, 1.0);
    const nnet::DenseNet cond = oracle::random_net({3 * n, 6, 5, 1}, 3000 + i);
    const LossResult sup = supervised_loss(cond, context, target);
    const auto fd_sup = oracle::fd_gradient(cond, [&](const nnet::DenseNet& net) {
      return supervised_loss(net, context, target).loss;
    });
    worst_sup = std::max(worst_sup, oracle::relative_error(sup.grads, fd_sup));

    const ConstraintSet cs = oracle::random_satisfiable_cnf(rng, n, 2, 2);
    std::set<Valuation> sampled;
    for (int s = 0; s < 4; ++s) sampled.insert(oracle::random_valuation(rng, n));
    const ValiditySplit vs = split_valid_invalid(cs, {sampled.begin(), sampled.end()});
    std::vector<Valuation> invalid = vs.invalid;
    if (invalid.empty()) {
      // make sure some loss term exists
      for (const Valuation& v : oracle::all_valuations(n)) {
        if (!oracle::brute_eval(cs, v) && !sampled.count(v)) {
          invalid.push_back(v);
          break;
        }
      }
    }
    const LossResult cons = constraint_loss(cond, context, vs.valid, invalid);
    const auto fd_cons = oracle::fd_gradient(cond, [&](const nnet::DenseNet& net) {
      return constraint_loss(net, context, vs.valid, invalid).loss;
    });
    if (!invalid.empty()) worst_cons = std::max(worst_cons, oracle::relative_error(cons.grads, fd_cons));
  }
  const bool pass = worst_bce < 1e-4 && worst_sup < 1e-4 && worst_cons < 1e-4;
  return {pass, std::to_string(instances) + " instances each, max rel err bce " + fmt(worst_bce) +
                    ", supervised " + fmt(worst_sup) + ", constraint " + fmt(worst_cons)};
}

// 4. SAT-guarded beam search never emits an invalid valuation.
Outcome sat_guard() {
  oracle::Rng rng(404);
  std::size_t bad = 0, empty = 0, total = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const std::size_t n = 1 + i % 10;
    const std::size_t clauses = 1 + static_cast<std::size_t>(rng() % (2 * n + 1));
    const ConstraintSet cs = oracle::random_satisfiable_cnf(rng, n, clauses, 3);
    const BaseSeqModel model = random_base_seq(2, n, 4000 + i);
    const auto x = oracle::random_vector(rng, 2, -2.0, 2.0);
    const std::size_t k = 1 + static_cast<std::size_t>(rng() % 6);
    const auto out = beam_search_sat(sequential_for(model, x), k, cs);
    if (out.empty()) ++empty;
    for (const auto& sv : out) {
      ++total;
      if (!oracle::brute_eval(cs, sv.valuation)) ++bad;
    }
  }
  return {bad == 0 && empty == 0, "500 CNFs, " + std::to_string(total) + " outputs, " +
                                      std::to_string(bad) + " invalid, " + std::to_string(empty) +
                                      " empty"};
}

// 5. Masks and the masked loss on the worked three-label example.
Outcome mask_fidelity() {
  const std::vector<Valuation> valid{{false, false, false}, {true, true, false}};
  const std::vector<Valuation> invalid{{false, false, true}, {true, false, true}};
  const MaskFlags masks = compute_masks(valid, invalid);
  const bool masks_ok = masks == MaskFlags{{false, false, true}, {false, true, true}};

  // Single affine layer over [pa | bits | known], so every conditional is
  // sigmoid of a hand-computable sum.
  BaseSeqModel model = BaseSeqModel::create(2, 3, {4}, {}, identity_order(3), 5);
  const MarginalAssignment pa{0.2, 0.7, 0.4};
  const double w_pa[3] = {0.5, -0.3, 0.8};
  const double w_bit[3] = {1.1, -0.7, 0.4};
  const double w_known[3] = {-0.2, 0.6, 0.3};
  const double bias = 0.15;
  nnet::DenseNet cond({9, 1});
  auto& layer = cond.layers()[0];
  for (int i = 0; i < 3; ++i) {
    layer.weight(0, i) = w_pa[i];
    layer.weight(0, 3 + i) = w_bit[i];
    layer.weight(0, 6 + i) = w_known[i];
  }
  layer.biases[0] = bias;
  model.cond = cond;

  auto c = [&](std::vector<int> prefix) {
    double z = bias;
    for (int i = 0; i < 3; ++i) z += w_pa[i] * pa[i];
    for (std::size_t i = 0; i < prefix.size(); ++i) z += w_bit[i] * prefix[i] + w_known[i];
    return 1.0 / (1.0 + std::exp(-z));
  };
  const double expected = std::log(c({0, 0})) + std::log(1.0 - c({1})) + std::log(c({1, 0}));
  const double got = constraint_loss(model, pa, valid, invalid).loss;
  const double diff = std::abs(got - expected);
  return {masks_ok && diff < 1e-12, std::string("masks ") + (masks_ok ? "(0,0,1),(0,1,1)" : "wrong") +
                                        ", |loss - three-term sum| = " + fmt(diff)};
}

// 6. Seq-only model on the two-rectangle toy, each scenario.
Outcome toy_accuracy() {
  std::string detail;
  bool pass = true;
  for (ToyScenario s :
       {ToyScenario::complete_overlap, ToyScenario::partial_overlap, ToyScenario::disjoint}) {
    const auto start = std::chrono::steady_clock::now();
    const ToyData toy = gen_toy(ToySpec::make(s, 10000, 11));
    const DatasetSplit parts = split(toy.data, 0.35, 0.15, 0.5, 11);
    PipelineConfig cfg;
    cfg.architecture = Architecture::seq_only;
    cfg.cond_hidden = {6, 6};
    cfg.seq_train.learning_rate = 0.01;
    cfg.seq_train.weight_decay = 0.0;
    cfg.seq_train.dropout_rate = 0.0;
    cfg.seq_train.patience = 500;
    cfg.seq_train.max_epochs = 3000;
    cfg.seed = 3;
    const TrainedModel trained = train_supervised(parts.train, parts.validation, cfg);
    const EvalReport report =
        evaluate(trained.model, &toy.constraints, parts.test, DecoderSpec{}, {1}, cfg.seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    pass = pass && report.accuracy >= 0.95 && secs <= 600.0;
    if (!detail.empty()) detail += "; ";
    detail += std::string(to_string(s)) + " " + fmt(100.0 * report.accuracy) + "% (" +
              std::to_string(trained.history.size()) + " epochs, " + fmt(secs) + " s)";
  }
  return {pass, detail};
}

struct AnticorrelatedRun {
  TrainedModel trained;
  DatasetSplit parts;
};

const AnticorrelatedRun& anticorrelated_run() {
  static const AnticorrelatedRun run = [] {
    AnticorrelatedRun r;
    r.parts = split(oracle::anticorrelated_toy(10000, 21), 0.5, 0.2, 0.3, 21);
    PipelineConfig cfg;
    cfg.base_hidden = {16, 16};
    cfg.cond_hidden = {16, 16};
    for (nnet::TrainConfig* t : {&cfg.base_train, &cfg.seq_train}) {
      t->learning_rate = 0.005;
      t->weight_decay = 0.0;
      t->dropout_rate = 0.0;
      t->batch_size = 32;
      t->patience = 40;
      t->max_epochs = 400;
    }
    cfg.seed = 5;
    r.trained = train_supervised(r.parts.train, r.parts.validation, cfg);
    return r;
  }();
  return run;
}

double anticorrelated_accuracy(DecoderKind kind, std::size_t width) {
  const AnticorrelatedRun& r = anticorrelated_run();
  DecoderSpec spec;
  spec.kind = kind;
  spec.width = width;
  return evaluate(r.trained.model, nullptr, r.parts.test, spec, {1}, 5).accuracy;
}

// 7. Sequential decoding beats the independence product on anti-correlated labels.
Outcome base_seq_beats_base() {
  const double seq = anticorrelated_accuracy(DecoderKind::beam, 4);
  const double base = anticorrelated_accuracy(DecoderKind::independent, 4);
  const double gap = 100.0 * (seq - base);
  return {gap >= 10.0, "Base-Seq " + fmt(100.0 * seq) + "%, independent Base " +
                           fmt(100.0 * base) + "%, gap " + fmt(gap) + " points"};
}

// 8. Accuracy against beam width.
Outcome beam_width_sensitivity() {
  std::string detail;
  double k1 = 0.0, k4 = 0.0, lo = 1.0, hi = 0.0;
  for (std::size_t k : {1, 2, 4, 8, 16, 32, 64}) {
    const double acc = anticorrelated_accuracy(DecoderKind::beam, k);
    if (k == 1) k1 = acc;
    if (k == 4) k4 = acc;
    if (k >= 4) {
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
    }
    detail += (detail.empty() ? "" : " ") + ("k=" + std::to_string(k) + ":" + fmt(100.0 * acc));
  }
  const bool pass = k1 <= k4 && 100.0 * (hi - lo) < 2.0;
  return {pass, detail + ", spread k>=4 " + fmt(100.0 * (hi - lo)) + " points"};
}

// 9. Pseudo-labels are valid and unmatched inputs are dropped.
Outcome pseudo_label_validity() {
  // Engineered Seq-only net over [x | bits | known]: the first label follows
  // sign(x), the second is pushed to false once the first is known true, so
  // for x > 0 the width-1 beam holds only the invalid (1,0) under O1 => O2.
  SeqOnlyModel model = SeqOnlyModel::create(1, 2, {}, identity_order(2), 1);
  nnet::DenseNet cond({5, 1});
  auto& layer = cond.layers()[0];
  layer.weight(0, 0) = 6.0;    // x
  layer.weight(0, 1) = -12.0;  // O1 bit
  layer.biases[0] = 0.0;
  model.cond = cond;
  const ConstraintSet cs(2, {{{1, false}, {2, true}}});
  const std::vector<std::vector<double>> inputs{{1.0}, {-1.0}, {0.8}, {-0.5}};
  const PseudoLabels engineered = pseudo_label(model, cs, inputs, 1);
  bool ok = engineered.discarded == 2 && engineered.examples.size() == 2;
  for (const auto& ex : engineered.examples) ok = ok && eval_full(cs, ex.target);

  // Random nets and formulas against an independent reading of the rule.
  oracle::Rng rng(909);
  std::size_t retained = 0, discarded = 0, mismatches = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t n = 2 + i % 5;
    const ConstraintSet rcs = oracle::random_satisfiable_cnf(rng, n, n, 3);
    BaseSeqModel bs = random_base_seq(2, n, 9000 + i);
    std::vector<std::vector<double>> xs;
    for (int j = 0; j < 5; ++j) xs.push_back(oracle::random_vector(rng, 2, -2.0, 2.0));
    const std::size_t k = 1 + i % 3;
    const PseudoLabels pl = pseudo_label(AnyModel{bs}, rcs, xs, k);
    std::size_t expect_discard = 0;
    std::vector<Valuation> expect;
    for (const auto& x : xs) {
      const auto beam = beam_search(sequential_for(bs, x), k);
      auto it = std::find_if(beam.begin(), beam.end(),
                             [&](const ScoredValuation& sv) { return oracle::brute_eval(rcs, sv.valuation); });
      if (it == beam.end()) {
        ++expect_discard;
      } else {
        expect.push_back(it->valuation);
      }
    }
    if (pl.discarded != expect_discard || pl.examples.size() != expect.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t j = 0; j < expect.size(); ++j) {
      if (pl.examples[j].target != expect[j] || !oracle::brute_eval(rcs, pl.examples[j].target)) {
        ++mismatches;
      }
    }
    retained += pl.examples.size();
    discarded += pl.discarded;
  }
  ok = ok && mismatches == 0;
  return {ok, "engineered net: " + std::to_string(engineered.examples.size()) + " kept, " +
                  std::to_string(engineered.discarded) + " dropped; random: " +
                  std::to_string(retained) + " kept, " + std::to_string(discarded) +
                  " dropped, " + std::to_string(mismatches) + " mismatches"};
}

// 10. Every CLI command reproduces its outputs byte for byte.
Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "seqlabel_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = SEQLABEL_CLI_PATH;

  auto run = [&](const std::string& args, const std::string& out_name) {
    const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (root / out_name).string() +
                            "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  auto same = [&](const fs::path& a, const fs::path& b) {
    return fs::exists(a) && fs::exists(b) &&
           text::read_file(a.string()) == text::read_file(b.string());
  };

  std::vector<std::string> failed;
  const std::string train_flags =
      " --seed 7 --max-epochs 3 --base-hidden 8 --cond-hidden 8 --label-order reverse";
  for (const char* rep : {"a", "b"}) {
    const fs::path d = root / rep;
    const std::string data = (d / "toy").string();
    bool ok = run("gen-toy --scenario partial_overlap --n 600 --seed 1 --out \"" + data + "\"",
                  std::string(rep) + "_gen.out");
    ok = ok && run("train --data \"" + data + "\"" + train_flags + " --out \"" +
                       (d / "m.bundle").string() + "\" --history \"" + (d / "h.csv").string() +
                       "\"",
                   std::string(rep) + "_train.out");
    const std::string model = " --model \"" + (d / "m.bundle").string() + "\" --data \"" + data + "\"";
    ok = ok && run("eval" + model + " --decoder beam-sat --constraints \"" + data +
                       "/constraints.cnf\" --topk 1,2",
                   std::string(rep) + "_eval.out");
    ok = ok && run("decode" + model + " --k 3", std::string(rep) + "_decode.out");
    ok = ok && run("sweep-beam" + model, std::string(rep) + "_sweep.out");
    ok = ok && run("unsup --data \"" + data + "\"" + train_flags +
                       " --method consloss --ratio 0.5 --lambda 0.5",
                   std::string(rep) + "_unsup.out");
    if (!ok) failed.push_back(std::string("run ") + rep);
  }
  const std::vector<std::string> files{"toy/train.csv", "toy/valid.csv", "toy/test.csv",
                                       "toy/constraints.cnf", "m.bundle", "h.csv"};
  for (const auto& f : files) {
    if (!same(root / "a" / f, root / "b" / f)) failed.push_back(f);
  }
  for (const char* cmd : {"gen", "train", "eval", "decode", "sweep", "unsup"}) {
    // summaries name their output paths, which differ between a/ and b/
    std::string a = text::read_file((root / (std::string("a_") + cmd + ".out")).string());
    std::string b = text::read_file((root / (std::string("b_") + cmd + ".out")).string());
    for (std::string* s : {&a, &b}) {
      const char* dir = s == &a ? "/a/" : "/b/";
      for (std::size_t p; (p = s->find(dir)) != std::string::npos;) s->replace(p, 3, "/_/");
    }
    if (a != b || a.empty()) failed.push_back(std::string(cmd) + " report");
  }
  std::string detail = "gen-toy, train, eval, decode, sweep-beam, unsup";
  if (!failed.empty()) {
    detail += "; differing:";
    for (const auto& f : failed) detail += " " + f;
  }
  fs::remove_all(root);
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"normalization", normalization},
      {"beam equals exact at full width", beam_equals_exact},
      {"gradient correctness", gradients},
      {"SAT-guard guarantee", sat_guard},
      {"mask fidelity", mask_fidelity},
      {"toy-problem accuracy", toy_accuracy},
      {"Base-Seq beats Base on correlated toy", base_seq_beats_base},
      {"beam-width sensitivity", beam_width_sensitivity},
      {"pseudo-label validity", pseudo_label_validity},
      {"CLI determinism", cli_determinism},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " ("
              << criteria[i].first << "): " << o.detail << " [" << fmt(secs) << " s]"
              << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

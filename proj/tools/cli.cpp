#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "seqlabel/constraints.hpp"
#include "seqlabel/data_io.hpp"
#include "seqlabel/errors.hpp"
#include "seqlabel/model.hpp"
#include "seqlabel/pipeline.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const std::string_view tok : text::split(s, ',')) {
    const auto v = text::parse_int(text::trim(tok));
    if (!v || *v < 0) throw UsageError(what + ": bad list entry '" + std::string(tok) + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string_view tok : text::split(s, ',')) {
    const auto v = text::parse_double(text::trim(tok));
    if (!v) throw UsageError(what + ": bad list entry '" + std::string(tok) + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

std::vector<std::size_t> parse_hidden(const std::string& s, const std::string& what) {
  const std::string_view t = text::trim(s);
  if (t.empty() || t == "none") return {};
  auto dims = parse_size_list(s, what);
  for (std::size_t d : dims) {
    if (d == 0) throw UsageError(what + ": hidden sizes must be positive");
  }
  return dims;
}

/// "identity", "reverse" or a 1-based permutation such as "2,1,3".
std::vector<std::size_t> parse_label_order(const std::string& s, std::size_t n) {
  if (s == "identity") return identity_order(n);
  if (s == "reverse") return reversed_order(n);
  std::vector<std::size_t> order = parse_size_list(s, "label-order");
  for (std::size_t& v : order) {
    if (v == 0) throw UsageError("label-order: entries are 1-based");
    --v;
  }
  check_permutation(order, n);
  return order;
}

/// Flat `key = value` file; keys name long options of the active command.
/// Values only fill options the command line left unset.
void apply_config(CLI::App* cmd, const std::string& path) {
  const std::string body = text::read_file(path);
  const auto lines = text::lines(body);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(i + 1, "expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    CLI::Option* opt = key == "config" ? nullptr : cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ParseError(i + 1, "unknown config key '" + key + "' for " + cmd->get_name());
    }
    if (opt->count() == 0) {
      opt->add_result(value);
      opt->run_callback();
    }
  }
}

std::size_t labels_from_dir(const fs::path& dir) {
  const fs::path cfg = dir / "dataset.cfg";
  if (!fs::exists(cfg)) {
    throw UsageError("label count unknown: pass --labels or provide " + cfg.string());
  }
  const std::string body = text::read_file(cfg.string());
  for (const std::string_view line : text::lines(body)) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || text::trim(line.substr(0, eq)) != "labels") continue;
    const auto v = text::parse_int(text::trim(line.substr(eq + 1)));
    if (!v || *v <= 0) throw UsageError("bad labels entry in " + cfg.string());
    return static_cast<std::size_t>(*v);
  }
  throw UsageError("no labels entry in " + cfg.string());
}

fs::path split_file(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".csv", ".arff"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw std::runtime_error("missing file " + (dir / (stem + ".csv")).string());
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::exists(path)) throw std::runtime_error("missing file " + path);
}

void write_or_print(const std::string& path, const std::string& body, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << body;
  } else {
    text::write_file(path, body);
  }
}

ModelBundle read_bundle(const std::string& path) {
  require_file(path, "--model");
  std::ifstream in(path);
  return load_bundle(in);
}

std::optional<ConstraintSet> read_constraints(const std::string& path) {
  if (path.empty()) return std::nullopt;
  require_file(path, "--constraints");
  return load_constraints(path);
}

void check_features(const AnyModel& model, const TabularDataset& data) {
  require_shape(data.m() == feature_count(model),
                "dataset has " + std::to_string(data.m()) + " features, model expects " +
                    std::to_string(feature_count(model)));
}

// ---------------------------------------------------------------- gen-toy

struct GenToyArgs {
  std::string scenario = "complete_overlap";
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string out = "toy";
  std::string fractions = "0.35,0.15,0.5";
};

int cmd_gen_toy(const GenToyArgs& a, std::ostream& out) {
  ToyScenario scenario;
  try {
    scenario = parse_scenario(a.scenario);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto fr = parse_double_list(a.fractions, "split");
  if (fr.size() != 3) throw UsageError("split: expected three fractions");

  const ToyData toy = gen_toy(ToySpec::make(scenario, a.n, a.seed));
  const DatasetSplit parts = split(toy.data, fr[0], fr[1], fr[2], a.seed);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  text::write_file((dir / "train.csv").string(), write_csv(parts.train));
  text::write_file((dir / "valid.csv").string(), write_csv(parts.validation));
  text::write_file((dir / "test.csv").string(), write_csv(parts.test));
  text::write_file((dir / "constraints.cnf").string(), to_dimacs(toy.constraints));
  text::write_file((dir / "dataset.cfg").string(), "labels = 2\n");

  std::size_t violating = 0;
  for (const Row& r : toy.data.rows) {
    if (!eval_full(toy.constraints, r.labels)) ++violating;
  }
  const json summary = {{"scenario", std::string(to_string(scenario))},
                        {"n", a.n},
                        {"seed", a.seed},
                        {"train", parts.train.size()},
                        {"valid", parts.validation.size()},
                        {"test", parts.test.size()},
                        {"constraint_violations", violating},
                        {"out", dir.string()}};
  out << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- training flags

struct TrainArgs {
  std::string data;
  std::size_t labels = 0;
  std::string mode = "base-seq";
  std::uint64_t seed = 0;
  std::size_t max_epochs = 500;
  std::string label_order = "identity";
  std::string base_hidden = "128,128";
  std::string cond_hidden = "300,300";
  nnet::TrainConfig base = base_stage_defaults();
  nnet::TrainConfig seq = seq_stage_defaults();
  std::size_t train_beam = 5;
  double lambda = 1.0;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "dataset directory (train/valid/test files)");
  cmd->add_option("--labels", a.labels, "number of label columns (default: dataset.cfg)");
  cmd->add_option("--mode", a.mode, "base-seq or seq-only")
      ->check(CLI::IsMember({"base-seq", "seq-only"}));
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--max-epochs", a.max_epochs, "epoch budget for each stage");
  cmd->add_option("--label-order", a.label_order, "identity, reverse or 1-based list");
  cmd->add_option("--base-hidden", a.base_hidden, "hidden sizes of the base net");
  cmd->add_option("--cond-hidden", a.cond_hidden, "hidden sizes of the conditional net");
  cmd->add_option("--base-lr", a.base.learning_rate);
  cmd->add_option("--base-wd", a.base.weight_decay);
  cmd->add_option("--base-dropout", a.base.dropout_rate);
  cmd->add_option("--base-batch", a.base.batch_size);
  cmd->add_option("--base-patience", a.base.patience);
  cmd->add_option("--seq-lr", a.seq.learning_rate);
  cmd->add_option("--seq-wd", a.seq.weight_decay);
  cmd->add_option("--seq-dropout", a.seq.dropout_rate);
  cmd->add_option("--seq-batch", a.seq.batch_size);
  cmd->add_option("--seq-patience", a.seq.patience);
}

PipelineConfig pipeline_config(const TrainArgs& a, std::size_t n_labels) {
  PipelineConfig cfg;
  cfg.architecture = a.mode == "seq-only" ? Architecture::seq_only : Architecture::base_seq;
  cfg.base_train = a.base;
  cfg.seq_train = a.seq;
  cfg.base_train.max_epochs = a.max_epochs;
  cfg.seq_train.max_epochs = a.max_epochs;
  cfg.base_train.validate();
  cfg.seq_train.validate();
  cfg.base_hidden = parse_hidden(a.base_hidden, "base-hidden");
  cfg.cond_hidden = parse_hidden(a.cond_hidden, "cond-hidden");
  cfg.label_order = parse_label_order(a.label_order, n_labels);
  if (a.train_beam == 0) throw UsageError("train-beam must be positive");
  cfg.train_beam_width = a.train_beam;
  cfg.constraint_weight = a.lambda;
  cfg.seed = a.seed;
  return cfg;
}

DatasetSplit load_split_dir(const TrainArgs& a) {
  if (a.data.empty()) throw UsageError("--data is required");
  const fs::path dir(a.data);
  if (!fs::is_directory(dir)) throw std::runtime_error("missing directory " + a.data);
  const std::size_t n = a.labels > 0 ? a.labels : labels_from_dir(dir);
  DatasetSplit s;
  s.train = load_dataset(split_file(dir, "train").string(), n);
  s.validation = load_dataset(split_file(dir, "valid").string(), n);
  s.test = load_dataset(split_file(dir, "test").string(), n);
  require_shape(s.train.m() == s.validation.m() && s.train.m() == s.test.m(),
                "train/valid/test feature counts differ");
  return s;
}

// ---------------------------------------------------------------- train

struct TrainOut {
  std::string out;
  std::string history;
};

int cmd_train(const TrainArgs& a, const TrainOut& o, std::ostream& out) {
  const DatasetSplit data = load_split_dir(a);
  const PipelineConfig cfg = pipeline_config(a, data.train.n());
  const TrainedModel trained = train_supervised(data.train, data.validation, cfg);

  const fs::path dir(a.data);
  const std::string bundle_path = o.out.empty() ? (dir / "model.bundle").string() : o.out;
  const std::string history_path = o.history.empty() ? (dir / "history.csv").string() : o.history;
  std::ostringstream bundle;
  save_bundle({trained.model, cfg.seed}, bundle);
  text::write_file(bundle_path, bundle.str());
  text::write_file(history_path, history_to_csv(trained.history));

  std::vector<std::size_t> order1;
  for (std::size_t v : label_order(trained.model)) order1.push_back(v + 1);
  const json summary = {{"bundle", bundle_path},
                        {"history", history_path},
                        {"mode", a.mode},
                        {"seed", a.seed},
                        {"label_order", order1},
                        {"epochs", trained.history.size()},
                        {"valid_nll", mean_nll(trained.model, data.validation)}};
  out << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval / decode / sweep

struct EvalArgs {
  std::string model;
  std::string data;
  std::string test;
  std::string decoder = "beam";
  std::size_t k = 4;
  std::string topk = "1";
  std::string constraints;
  std::size_t cap = kDefaultEnumerationCap;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string widths = "1,2,4,8,16,32,64";
};

TabularDataset load_eval_set(const EvalArgs& a, const AnyModel& model) {
  std::string path = a.test;
  if (path.empty()) {
    if (a.data.empty()) throw UsageError("--test or --data is required");
    path = split_file(a.data, "test").string();
  }
  require_file(path, "--test");
  TabularDataset data = load_dataset(path, label_count(model));
  check_features(model, data);
  return data;
}

DecoderSpec decoder_spec(const EvalArgs& a) {
  DecoderSpec spec;
  try {
    spec.kind = parse_decoder(a.decoder);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.k == 0) throw UsageError("--k must be positive");
  spec.width = a.k;
  spec.enumeration_cap = a.cap;
  return spec;
}

json eval_json(const EvalReport& report, const EvalArgs& a) {
  json j = json::parse(report.to_json());
  j["model"] = a.model;
  j["constraints"] = a.constraints;
  return j;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ModelBundle bundle = read_bundle(a.model);
  const DecoderSpec spec = decoder_spec(a);
  const auto cs = read_constraints(a.constraints);
  const TabularDataset test = load_eval_set(a, bundle.model);
  const auto ks = parse_size_list(a.topk, "topk");
  const EvalReport report = evaluate(bundle.model, cs ? &*cs : nullptr, test, spec, ks,
                                     a.seed.value_or(bundle.seed));
  write_or_print(a.out, eval_json(report, a).dump(2) + "\n", out);
  return 0;
}

int cmd_decode(const EvalArgs& a, std::ostream& out) {
  const ModelBundle bundle = read_bundle(a.model);
  const DecoderSpec spec = decoder_spec(a);
  const auto cs = read_constraints(a.constraints);
  const TabularDataset data = load_eval_set(a, bundle.model);
  const auto& order = label_order(bundle.model);
  json rows = json::array();
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto ranked = decode(bundle.model, data.rows[i].features, spec, cs ? &*cs : nullptr);
    json preds = json::parse(decoded_to_json(ranked));
    // valuations are reported in dataset column order
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      preds[r]["valuation"] = to_column_order(ranked[r].valuation, order).to_string();
    }
    rows.push_back({{"row", i}, {"predictions", preds}});
  }
  write_or_print(a.out, rows.dump(2) + "\n", out);
  return 0;
}

int cmd_sweep(const EvalArgs& a, std::ostream& out) {
  const ModelBundle bundle = read_bundle(a.model);
  DecoderSpec spec = decoder_spec(a);
  if (spec.kind != DecoderKind::beam && spec.kind != DecoderKind::beam_sat) {
    throw UsageError("sweep-beam needs --decoder beam or beam-sat");
  }
  const auto cs = read_constraints(a.constraints);
  const TabularDataset test = load_eval_set(a, bundle.model);
  std::string csv = "width,accuracy\n";
  for (std::size_t w : parse_size_list(a.widths, "widths")) {
    if (w == 0) throw UsageError("widths: entries must be positive");
    spec.width = w;
    const EvalReport r = evaluate(bundle.model, cs ? &*cs : nullptr, test, spec, {1},
                                  a.seed.value_or(bundle.seed));
    csv += std::to_string(w) + "," + text::format_double(r.accuracy) + "\n";
  }
  write_or_print(a.out, csv, out);
  return 0;
}

void add_eval_flags(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--model", a.model, "model bundle");
  cmd->add_option("--data", a.data, "dataset directory (uses its test split)");
  cmd->add_option("--test", a.test, "test file, overrides --data");
  cmd->add_option("--decoder", a.decoder, "beam, beam-sat, exact, greedy or independent");
  cmd->add_option("--k", a.k, "beam width (entries kept for exact)");
  cmd->add_option("--constraints", a.constraints, "DIMACS constraint file");
  cmd->add_option("--cap", a.cap, "label cap for exact enumeration");
  cmd->add_option("--seed", a.seed, "seed recorded in the report (default: bundle seed)");
  cmd->add_option("--out", a.out, "output file (default stdout)");
}

// ---------------------------------------------------------------- unsup

struct UnsupArgs {
  std::string method = "pseudo";
  std::string ratios = "0.5";
  std::string constraints;
  std::string decoder = "beam";
  std::size_t k = 4;
  std::string topk = "1";
  std::string out;
};

int cmd_unsup(const TrainArgs& t, const UnsupArgs& u, std::ostream& out) {
  const DatasetSplit data = load_split_dir(t);
  const PipelineConfig cfg = pipeline_config(t, data.train.n());
  if (u.method != "pseudo" && u.method != "consloss") {
    throw UsageError("unknown method '" + u.method + "'");
  }
  const UnsupMethod method = u.method == "pseudo" ? UnsupMethod::pseudo : UnsupMethod::consloss;
  std::string cs_path = u.constraints;
  if (cs_path.empty()) cs_path = (fs::path(t.data) / "constraints.cnf").string();
  require_file(cs_path, "--constraints");
  const ConstraintSet cs = load_constraints(cs_path);

  EvalArgs ea;
  ea.decoder = u.decoder;
  ea.k = u.k;
  const DecoderSpec spec = decoder_spec(ea);
  const auto ks = parse_size_list(u.topk, "topk");

  json results = json::array();
  json table = json::object();
  for (double r : parse_double_list(u.ratios, "ratio")) {
    if (!(r >= 0.0 && r < 1.0)) throw UsageError("ratio must be in [0, 1)");
    const UnsupResult res = run_unsupervised_experiment(data, cs, cfg, method, r, spec, ks);
    results.push_back(json::parse(res.to_json()));
    table[text::format_double(r)] = res.accuracy_delta;
  }
  const json j = {{"method", u.method},
                  {"lambda", t.lambda},
                  {"seed", t.seed},
                  {"accuracy_delta", table},
                  {"results", results}};
  write_or_print(u.out, j.dump(2) + "\n", out);
  return 0;
}

}  // namespace

namespace {

std::string one_line(std::string msg) {
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return msg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-label classification with sequential label models"};
  app.require_subcommand(1);
  std::string config;

  GenToyArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-toy", "generate the two-rectangle toy dataset");
  gen_cmd->add_option("--scenario", gen.scenario,
                      "complete_overlap, partial_overlap or disjoint");
  gen_cmd->add_option("--n", gen.n, "number of samples");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "output directory");
  gen_cmd->add_option("--split", gen.fractions, "train,valid,test fractions");

  TrainArgs train;
  TrainOut train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model bundle");
  add_train_flags(train_cmd, train);
  train_cmd->add_option("--out", train_out.out, "bundle path (default DATA/model.bundle)");
  train_cmd->add_option("--history", train_out.history, "history CSV (default DATA/history.csv)");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a bundle on a test set");
  add_eval_flags(eval_cmd, ev);
  eval_cmd->add_option("--topk", ev.topk, "comma-separated top-k list");

  EvalArgs dec;
  CLI::App* decode_cmd = app.add_subcommand("decode", "ranked predictions per row as JSON");
  add_eval_flags(decode_cmd, dec);
  decode_cmd->get_option("--test")->description("input file");

  EvalArgs sw;
  CLI::App* sweep_cmd = app.add_subcommand("sweep-beam", "accuracy for a list of beam widths");
  add_eval_flags(sweep_cmd, sw);
  sweep_cmd->add_option("--widths", sw.widths, "comma-separated beam widths");

  TrainArgs ut;
  UnsupArgs ua;
  CLI::App* unsup_cmd = app.add_subcommand("unsup", "semi-supervised experiment");
  add_train_flags(unsup_cmd, ut);
  unsup_cmd->add_option("--method", ua.method, "pseudo or consloss");
  unsup_cmd->add_option("--ratio", ua.ratios, "unsupervised ratio or comma-separated list");
  unsup_cmd->add_option("--lambda", ut.lambda, "constraint loss weight");
  unsup_cmd->add_option("--train-beam", ut.train_beam, "beam width for pseudo labels / masks");
  unsup_cmd->add_option("--constraints", ua.constraints, "DIMACS file (default DATA/constraints.cnf)");
  unsup_cmd->add_option("--decoder", ua.decoder, "decoder used for evaluation");
  unsup_cmd->add_option("--k", ua.k, "evaluation beam width");
  unsup_cmd->add_option("--topk", ua.topk, "comma-separated top-k list");
  unsup_cmd->add_option("--out", ua.out, "output file (default stdout)");

  for (CLI::App* cmd : {gen_cmd, train_cmd, eval_cmd, decode_cmd, sweep_cmd, unsup_cmd}) {
    cmd->add_option("--config", config, "key = value file; flags take precedence");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    CLI::App* active = app.get_subcommands().front();
    if (!config.empty()) {
      require_file(config, "--config");
      apply_config(active, config);
    }
    if (active == gen_cmd) return cmd_gen_toy(gen, out);
    if (active == train_cmd) return cmd_train(train, train_out, out);
    if (active == eval_cmd) return cmd_eval(ev, out);
    if (active == decode_cmd) return cmd_decode(dec, out);
    if (active == sweep_cmd) return cmd_sweep(sw, out);
    return cmd_unsup(ut, ua, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::Error& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: parse: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const ShapeError& e) {
    err << "error: shape: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const ContractError& e) {
    err << "error: refused: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "error: numeric: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace seqlabel::cli

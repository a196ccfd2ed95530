#include "seqlabel/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "seqlabel/errors.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel {

ConditionalNet::ConditionalNet(const nnet::DenseNet& net, std::vector<double> context,
                               std::size_t n_labels)
    : net_(&net), context_(std::move(context)), n_(n_labels) {
  require_shape(net.input_dim() == context_.size() + 2 * n_ && net.output_dim() == 1,
                "conditional net shape does not match context + 2n -> 1");
}

std::vector<double> ConditionalNet::encode(const PrefixValuation& prefix) const {
  return encode_context_prefix(context_, prefix, n_);
}

double ConditionalNet::conditional(const PrefixValuation& prefix) const {
  if (prefix.size() >= n_) {
    throw ContractError("conditional queried with a full-length prefix");
  }
  return nnet::forward(*net_, encode(prefix))[0];
}

double IndependentMarginals::conditional(const PrefixValuation& prefix) const {
  if (prefix.size() >= pa_.size()) {
    throw ContractError("conditional queried with a full-length prefix");
  }
  return pa_[prefix.size()];
}

std::vector<double> encode_context_prefix(std::span<const double> context,
                                          const PrefixValuation& prefix, std::size_t n) {
  require_shape(prefix.size() <= n, "prefix longer than label count");
  std::vector<double> out(context.size() + 2 * n, 0.0);
  std::copy(context.begin(), context.end(), out.begin());
  const std::size_t values = context.size();
  const std::size_t mask = values + n;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    out[values + i] = prefix[i] ? 1.0 : 0.0;
    out[mask + i] = 1.0;
  }
  return out;
}

std::vector<double> encode_cond_input(const MarginalAssignment& pa, const PrefixValuation& prefix) {
  return encode_context_prefix(pa, prefix, pa.size());
}

double step_probability(double c, bool bit) {
  const double p = bit ? c : 1.0 - c;
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

double step_log_term(double c, bool bit) { return std::log(step_probability(c, bit)); }

double joint_logprob(const SequentialDistribution& dist, const Valuation& v) {
  require_shape(v.size() == dist.n_labels(), "valuation length does not match label count");
  double logp = 0.0;
  PrefixValuation prefix;
  for (std::size_t j = 0; j < v.size(); ++j) {
    logp += step_log_term(dist.conditional(prefix), v[j]);
    prefix.push_back(v[j]);
  }
  return logp;
}

double joint_prob_base(const MarginalAssignment& pa, const Valuation& v) {
  require_shape(pa.size() == v.size(), "joint_prob_base: length mismatch");
  double p = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j) p *= v[j] ? pa[j] : 1.0 - pa[j];
  return p;
}

namespace {

std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::vector<std::size_t> order_or_identity(std::vector<std::size_t> order, std::size_t n) {
  if (order.empty()) return identity_order(n);
  check_permutation(order, n);
  return order;
}

}  // namespace

BaseSeqModel BaseSeqModel::create(std::size_t m, std::size_t n,
                                  const std::vector<std::size_t>& base_hidden,
                                  const std::vector<std::size_t>& cond_hidden,
                                  std::vector<std::size_t> label_order, std::uint64_t seed) {
  BaseSeqModel model;
  model.n = n;
  model.m = m;
  model.base = nnet::DenseNet::glorot(with_ends(m, base_hidden, n), seed);
  model.cond = nnet::DenseNet::glorot(with_ends(3 * n, cond_hidden, 1), seed + 1);
  model.label_order = order_or_identity(std::move(label_order), n);
  return model;
}

void BaseSeqModel::validate() const {
  require_shape(n > 0 && m > 0, "model needs at least one feature and one label");
  require_shape(base.input_dim() == m && base.output_dim() == n, "base net must map m -> n");
  require_shape(cond.input_dim() == 3 * n && cond.output_dim() == 1, "cond net must map 3n -> 1");
  check_permutation(label_order, n);
}

SeqOnlyModel SeqOnlyModel::create(std::size_t m, std::size_t n,
                                  const std::vector<std::size_t>& cond_hidden,
                                  std::vector<std::size_t> label_order, std::uint64_t seed) {
  SeqOnlyModel model;
  model.n = n;
  model.m = m;
  model.cond = nnet::DenseNet::glorot(with_ends(m + 2 * n, cond_hidden, 1), seed + 1);
  model.label_order = order_or_identity(std::move(label_order), n);
  return model;
}

void SeqOnlyModel::validate() const {
  require_shape(n > 0 && m > 0, "model needs at least one feature and one label");
  require_shape(cond.input_dim() == m + 2 * n && cond.output_dim() == 1,
                "cond net must map m + 2n -> 1");
  check_permutation(label_order, n);
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

std::vector<std::size_t> reversed_order(std::size_t n) {
  auto order = identity_order(n);
  std::reverse(order.begin(), order.end());
  return order;
}

void check_permutation(const std::vector<std::size_t>& order, std::size_t n) {
  require_shape(order.size() == n, "label order must list every label exactly once");
  std::vector<bool> seen(n, false);
  for (std::size_t idx : order) {
    require_shape(idx < n && !seen[idx], "label order is not a permutation");
    seen[idx] = true;
  }
}

Valuation to_model_order(const Valuation& column_values, const std::vector<std::size_t>& order) {
  require_shape(column_values.size() == order.size(), "label order length mismatch");
  Valuation out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) out.set(i, column_values[order[i]]);
  return out;
}

Valuation to_column_order(const Valuation& model_values, const std::vector<std::size_t>& order) {
  require_shape(model_values.size() == order.size(), "label order length mismatch");
  Valuation out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) out.set(order[i], model_values[i]);
  return out;
}

MarginalAssignment base_predict(const BaseSeqModel& model, std::span<const double> x) {
  require_shape(x.size() == model.m, "base_predict: expected " + std::to_string(model.m) +
                                         " features, got " + std::to_string(x.size()));
  const std::vector<double> raw = nnet::forward(model.base, x);
  MarginalAssignment pa(model.n);
  for (std::size_t i = 0; i < model.n; ++i) pa[i] = raw[model.label_order[i]];
  return pa;
}

double cond_predict(const BaseSeqModel& model, const MarginalAssignment& pa,
                    const PrefixValuation& prefix) {
  require_shape(pa.size() == model.n, "cond_predict: marginal count mismatch");
  return ConditionalNet(model.cond, pa, model.n).conditional(prefix);
}

double joint_logprob_seq(const BaseSeqModel& model, const MarginalAssignment& pa, const Valuation& v) {
  require_shape(pa.size() == model.n, "joint_logprob_seq: marginal count mismatch");
  return joint_logprob(ConditionalNet(model.cond, pa, model.n), v);
}

double seq_only_cond_predict(const SeqOnlyModel& model, std::span<const double> x,
                             const PrefixValuation& prefix) {
  require_shape(x.size() == model.m, "seq_only_cond_predict: feature count mismatch");
  return ConditionalNet(model.cond, std::vector<double>(x.begin(), x.end()), model.n)
      .conditional(prefix);
}

std::size_t label_count(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.n; }, model);
}

std::size_t feature_count(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.m; }, model);
}

const std::vector<std::size_t>& label_order(const AnyModel& model) {
  return std::visit([](const auto& m) -> const std::vector<std::size_t>& { return m.label_order; },
                    model);
}

const nnet::DenseNet& conditional_net(const AnyModel& model) {
  return std::visit([](const auto& m) -> const nnet::DenseNet& { return m.cond; }, model);
}

std::vector<double> context_for(const AnyModel& model, std::span<const double> x) {
  if (const auto* bs = std::get_if<BaseSeqModel>(&model)) return base_predict(*bs, x);
  const auto& so = std::get<SeqOnlyModel>(model);
  require_shape(x.size() == so.m, "feature count mismatch");
  return {x.begin(), x.end()};
}

ConditionalNet sequential_for(const AnyModel& model, std::span<const double> x) {
  return ConditionalNet(conditional_net(model), context_for(model, x), label_count(model));
}

ConditionalNet sequential_for(const BaseSeqModel& model, std::span<const double> x) {
  return ConditionalNet(model.cond, base_predict(model, x), model.n);
}

ConditionalNet sequential_for(const SeqOnlyModel& model, std::span<const double> x) {
  require_shape(x.size() == model.m, "input has " + std::to_string(x.size()) +
                                         " features, model expects " + std::to_string(model.m));
  return ConditionalNet(model.cond, std::vector<double>(x.begin(), x.end()), model.n);
}

namespace {

constexpr const char* kBundleMagic = "SEQLABEL-BUNDLE-1";

std::string read_keyed_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "bundle truncated before '" + std::string(key) + "'");
  const std::string_view trimmed = text::trim(line);
  if (trimmed.substr(0, key.size()) != key ||
      (trimmed.size() > key.size() && trimmed[key.size()] != ' ')) {
    throw ParseError(0, "bundle: expected '" + std::string(key) + "', got '" + std::string(trimmed) + "'");
  }
  return std::string(text::trim(trimmed.substr(key.size())));
}

std::size_t parse_count(const std::string& value, std::string_view key) {
  const auto v = text::parse_int(value);
  if (!v || *v < 0) throw ParseError(0, "bundle: bad value for " + std::string(key));
  return static_cast<std::size_t>(*v);
}

}  // namespace

void save_bundle(const ModelBundle& bundle, std::ostream& out) {
  const bool base_seq = std::holds_alternative<BaseSeqModel>(bundle.model);
  out << kBundleMagic << '\n';
  out << "kind " << (base_seq ? "base-seq" : "seq-only") << '\n';
  out << "n " << label_count(bundle.model) << '\n';
  out << "m " << feature_count(bundle.model) << '\n';
  out << "label_order";
  for (std::size_t idx : label_order(bundle.model)) out << ' ' << idx + 1;
  out << '\n';
  out << "seed " << bundle.seed << '\n';
  if (base_seq) {
    out << "base\n";
    nnet::save(std::get<BaseSeqModel>(bundle.model).base, out);
  }
  out << "cond\n";
  nnet::save(conditional_net(bundle.model), out);
}

ModelBundle load_bundle(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kBundleMagic) {
    throw ParseError(1, std::string("expected header ") + kBundleMagic);
  }
  const std::string kind = read_keyed_line(in, "kind");
  if (kind != "base-seq" && kind != "seq-only") throw ParseError(0, "bundle: unknown kind " + kind);
  const std::size_t n = parse_count(read_keyed_line(in, "n"), "n");
  const std::size_t m = parse_count(read_keyed_line(in, "m"), "m");
  std::vector<std::size_t> order;
  for (std::string_view token : text::split_ws(read_keyed_line(in, "label_order"))) {
    const auto v = text::parse_int(token);
    if (!v || *v < 1) throw ParseError(0, "bundle: label order entries are 1-based integers");
    order.push_back(static_cast<std::size_t>(*v - 1));
  }
  const auto seed = text::parse_int(read_keyed_line(in, "seed"));
  if (!seed) throw ParseError(0, "bundle: bad seed");

  ModelBundle bundle;
  bundle.seed = static_cast<std::uint64_t>(*seed);
  if (kind == "base-seq") {
    BaseSeqModel model;
    model.n = n;
    model.m = m;
    model.label_order = std::move(order);
    read_keyed_line(in, "base");
    model.base = nnet::load(in);
    read_keyed_line(in, "cond");
    model.cond = nnet::load(in);
    model.validate();
    bundle.model = std::move(model);
  } else {
    SeqOnlyModel model;
    model.n = n;
    model.m = m;
    model.label_order = std::move(order);
    read_keyed_line(in, "cond");
    model.cond = nnet::load(in);
    model.validate();
    bundle.model = std::move(model);
  }
  return bundle;
}

}  // namespace seqlabel

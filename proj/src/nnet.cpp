#include "seqlabel/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "seqlabel/errors.hpp"
#include "seqlabel/text.hpp"

namespace seqlabel::nnet {

namespace {

constexpr const char* kNetMagic = "SEQLABEL-NET-1";

void check_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw ShapeError("a network needs at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ShapeError("layer sizes must be positive");
  }
}

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  check_sizes(sizes_);
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    Layer layer;
    layer.in = sizes_[l];
    layer.out = sizes_[l + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.biases.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
  }
}

DenseNet DenseNet::glorot(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  DenseNet net(std::move(layer_sizes));
  Rng rng(seed);
  for (Layer& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weights) w = dist(rng);
  }
  return net;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& layer : layers_) count += layer.weights.size() + layer.biases.size();
  return count;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (const Layer& layer : net.layers()) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  require_shape(weights.size() == other.weights.size(), "gradient layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require_shape(weights[l].size() == other.weights[l].size() &&
                      biases[l].size() == other.biases[l].size(),
                  "gradient shape mismatch");
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += scale * other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += scale * other.biases[l][i];
  }
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (double& x : w) x *= factor;
  for (auto& b : biases)
    for (double& x : b) x *= factor;
}

void Gradients::set_zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ForwardTrace forward_trace(const DenseNet& net, std::span<const double> x,
                           const DropoutSpec& dropout) {
  if (x.size() != net.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.size()) + " values, net expects " +
                     std::to_string(net.input_dim()));
  }
  const auto& layers = net.layers();
  const std::size_t n_layers = layers.size();

  ForwardTrace trace;
  trace.inputs.resize(n_layers);
  trace.pre.resize(n_layers);
  std::vector<double> current(x.begin(), x.end());

  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = layers[l];
    if (l == n_layers - 1 && l > 0 && dropout.active()) {
      // Inverted dropout on the last hidden layer's activations.
      std::bernoulli_distribution keep(1.0 - dropout.rate);
      const double inv_keep = 1.0 / (1.0 - dropout.rate);
      trace.dropout_scale.resize(current.size());
      for (std::size_t i = 0; i < current.size(); ++i) {
        trace.dropout_scale[i] = keep(*dropout.rng) ? inv_keep : 0.0;
        current[i] *= trace.dropout_scale[i];
      }
    }
    std::vector<double> z(layer.biases);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* row = layer.weights.data() + r * layer.in;
      double acc = 0.0;
      for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * current[c];
      z[r] += acc;
    }
    trace.inputs[l] = std::move(current);
    current.resize(layer.out);
    const bool is_output = (l == n_layers - 1);
    for (std::size_t r = 0; r < layer.out; ++r) {
      current[r] = is_output ? sigmoid(z[r]) : std::max(0.0, z[r]);
    }
    trace.pre[l] = std::move(z);
  }
  trace.output = std::move(current);
  return trace;
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
  return forward_trace(net, x).output;
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x,
                            const DropoutSpec& dropout) {
  return forward_trace(net, x, dropout).output;
}

void accumulate_backward(const DenseNet& net, const ForwardTrace& trace,
                         std::span<const double> upstream, Gradients& grads, double scale) {
  const auto& layers = net.layers();
  require_shape(upstream.size() == net.output_dim(), "backward: upstream gradient size mismatch");
  require_shape(trace.inputs.size() == layers.size() && trace.output.size() == net.output_dim(),
                "backward: trace does not match network");
  require_shape(grads.weights.size() == layers.size(), "backward: gradient buffer mismatch");

  // delta = dL/dz for the current layer
  std::vector<double> delta(net.output_dim());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double s = trace.output[i];
    delta[i] = scale * upstream[i] * s * (1.0 - s);
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const std::vector<double>& input = trace.inputs[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* grow = gw.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) grow[c] += d * input[c];
    }
    if (l == 0) break;

    std::vector<double> next(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) next[c] += row[c] * d;
    }
    if (l == layers.size() - 1 && !trace.dropout_scale.empty()) {
      for (std::size_t c = 0; c < next.size(); ++c) next[c] *= trace.dropout_scale[c];
    }
    const std::vector<double>& z = trace.pre[l - 1];
    for (std::size_t c = 0; c < next.size(); ++c) {
      if (!(z[c] > 0.0)) next[c] = 0.0;
    }
    delta = std::move(next);
  }
}

Gradients backward(const DenseNet& net, std::span<const double> x,
                   std::span<const double> upstream) {
  Gradients grads = Gradients::zeros_like(net);
  accumulate_backward(net, forward_trace(net, x), upstream, grads);
  return grads;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must be in [0, 1)");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (patience == 0) throw std::invalid_argument("patience must be positive");
}

AdamState AdamState::zeros_like(const DenseNet& net) {
  AdamState state;
  state.first_moment = Gradients::zeros_like(net);
  state.second_moment = Gradients::zeros_like(net);
  return state;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
  auto& layers = net.layers();
  require_shape(grads.weights.size() == layers.size(), "adam_step: gradient layer count mismatch");
  if (state.first_moment.weights.empty()) state = AdamState::zeros_like(net);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require_shape(grads.weights[l].size() == layers[l].weights.size() &&
                      grads.biases[l].size() == layers[l].biases.size(),
                  "adam_step: gradient shape mismatch in layer " + std::to_string(l));
    const auto finite = [](double g) { return std::isfinite(g); };
    if (!std::all_of(grads.weights[l].begin(), grads.weights[l].end(), finite) ||
        !std::all_of(grads.biases[l].begin(), grads.biases[l].end(), finite)) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double decay = cfg.learning_rate * cfg.weight_decay;

  const auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= decay * params[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(layers[l].biases, grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

TrainResult train_loop(DenseNet net, Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result;
  result.net = net;
  result.best_valid_loss = std::numeric_limits<double>::infinity();
  if (cfg.max_epochs == 0) return result;

  const std::size_t n = objective.train_size();
  if (n == 0) throw std::invalid_argument("train_loop: empty training set");

  Rng rng(cfg.rng_seed);
  AdamState adam = AdamState::zeros_like(net);
  Gradients grads = Gradients::zeros_like(net);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const DropoutSpec dropout{cfg.dropout_rate, &rng};

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      grads.set_zero();
      const double loss = objective.batch_loss(net, batch, dropout, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(batch.size());
      adam_step(net, grads, adam, cfg);
    }
    const double valid = objective.validation_loss(net);
    if (!std::isfinite(valid)) {
      throw NumericError("non-finite validation loss in epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(n), valid});

    if (valid < result.best_valid_loss) {
      result.best_valid_loss = valid;
      result.best_epoch = epoch;
      result.net = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

void save(const DenseNet& net, std::ostream& out) {
  out << kNetMagic << '\n';
  const auto& sizes = net.layer_sizes();
  out << sizes.size();
  for (std::size_t s : sizes) out << ' ' << s;
  out << '\n';
  const auto write_row = [&](const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ' ';
      out << text::format_double(values[i]);
    }
    out << '\n';
  };
  for (const Layer& layer : net.layers()) {
    write_row(layer.weights);
    write_row(layer.biases);
  }
}

DenseNet load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(line_no, "unexpected end of network data");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (text::trim(next_line()) != kNetMagic) {
    throw ParseError(line_no, std::string("expected header ") + kNetMagic);
  }
  const auto size_tokens = text::split_ws(next_line());
  if (size_tokens.empty()) throw ParseError(line_no, "missing layer sizes");
  const auto count = text::parse_int(size_tokens[0]);
  if (!count || *count < 2 || static_cast<std::size_t>(*count) + 1 != size_tokens.size()) {
    throw ParseError(line_no, "malformed layer size line");
  }
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < size_tokens.size(); ++i) {
    const auto s = text::parse_int(size_tokens[i]);
    if (!s || *s <= 0) throw ParseError(line_no, "layer sizes must be positive integers");
    sizes.push_back(static_cast<std::size_t>(*s));
  }

  DenseNet net(sizes);
  const auto read_row = [&](std::vector<double>& values) {
    const auto tokens = text::split_ws(next_line());
    if (tokens.size() != values.size()) {
      throw ParseError(line_no, "expected " + std::to_string(values.size()) + " values, got " +
                                    std::to_string(tokens.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto v = text::parse_double(tokens[i]);
      if (!v) throw ParseError(line_no, "bad number '" + std::string(tokens[i]) + "'");
      values[i] = *v;
    }
  };
  for (Layer& layer : net.layers()) {
    read_row(layer.weights);
    read_row(layer.biases);
  }
  return net;
}

}  // namespace seqlabel::nnet

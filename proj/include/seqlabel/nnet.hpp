#ifndef SEQLABEL_NNET_HPP
#define SEQLABEL_NNET_HPP

// Small fully connected network engine: ReLU hidden layers, elementwise
// sigmoid output, exact backprop, Adam with decoupled weight decay, and an
// early-stopping minibatch loop.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace seqlabel::nnet {

using Rng = std::mt19937_64;

/// One affine layer. `weights` is row-major with shape (out x in).
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& weight(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double weight(std::size_t row, std::size_t col) const { return weights[row * in + col]; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Multilayer perceptron. layer_sizes = {input, hidden..., output}.
class DenseNet {
 public:
  DenseNet() = default;
  /// All weights and biases zero.
  explicit DenseNet(std::vector<std::size_t> layer_sizes);

  /// Glorot-uniform weights, zero biases.
  static DenseNet glorot(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const;

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
};

/// Parameter-shaped buffer: gradients and Adam moments.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const DenseNet& net);
  void add_scaled(const Gradients& other, double scale);
  void scale(double factor);
  void set_zero();
};

/// Inverted dropout on the last hidden layer. Only used in training.
struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

/// Everything backward() needs from one forward pass.
struct ForwardTrace {
  std::vector<std::vector<double>> inputs;  // input fed to each layer (post-dropout)
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::vector<double> dropout_scale;        // per unit of the last hidden layer; empty if off
  std::vector<double> output;
};

double sigmoid(double z);

std::vector<double> forward(const DenseNet& net, std::span<const double> x);
std::vector<double> forward(const DenseNet& net, std::span<const double> x,
                            const DropoutSpec& dropout);
ForwardTrace forward_trace(const DenseNet& net, std::span<const double> x,
                           const DropoutSpec& dropout = {});

/// grads += scale * d(upstream . output)/d(params), using the activations
/// (and dropout mask) recorded in `trace`. ReLU'(0) is taken as 0.
void accumulate_backward(const DenseNet& net, const ForwardTrace& trace,
                         std::span<const double> upstream, Gradients& grads,
                         double scale = 1.0);

/// Gradient of upstream . forward(net, x) with dropout disabled.
Gradients backward(const DenseNet& net, std::span<const double> x,
                   std::span<const double> upstream);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  double dropout_rate = 0.1;
  std::size_t batch_size = 16;
  std::size_t patience = 20;
  std::size_t max_epochs = 1000;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros_like(const DenseNet& net);
};

/// Decoupled weight decay followed by a bias-corrected Adam update.
/// Throws NumericError naming the layer if a gradient is not finite.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg);

/// Training objective over an indexed training set.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t train_size() const = 0;
  /// Mean loss over the samples in `batch`; adds the gradient of that mean
  /// into `grads`.
  virtual double batch_loss(const DenseNet& net, std::span<const std::size_t> batch,
                            const DropoutSpec& dropout, Gradients& grads) = 0;
  /// Mean validation loss with dropout off.
  virtual double validation_loss(const DenseNet& net) = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  DenseNet net;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_valid_loss = 0.0;
};

/// Shuffled minibatch epochs with early stopping on validation loss.
/// Stops after `patience` epochs without strict improvement or at
/// `max_epochs`; returns the best epoch's parameters.
TrainResult train_loop(DenseNet net, Objective& objective, const TrainConfig& cfg);

// Text serialization, header "SEQLABEL-NET-1". Doubles are written in
// shortest round-trip form so load(save(net)) == net exactly.
void save(const DenseNet& net, std::ostream& out);
DenseNet load(std::istream& in);

}  // namespace seqlabel::nnet

#endif  // SEQLABEL_NNET_HPP

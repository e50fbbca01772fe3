#pragma once

// Learned SLF prior: a layered encoder/decoder pair built from dense,
// convolution and transposed-convolution layers with SELU, sigmoid or
// identity activations. Feature vectors are channel-major (c, h, w), so a
// single-channel I x J map is laid out exactly like Slf::vec().

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/core.hpp"
#include "radiomap/simulate.hpp"

namespace radiomap {

enum class LayerKind : std::uint8_t { kDense = 0, kConv = 1, kConvTranspose = 2 };
enum class Activation : std::uint8_t { kIdentity = 0, kSelu = 1, kSigmoid = 2 };

struct Shape3 {
  int channels = 1;
  int height = 1;
  int width = 1;
  int size() const { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

/// For dense layers in_channels is the input feature count and the output
/// has shape (out_channels, out_height, out_width); the convolution geometry
/// fields are ignored.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int output_padding = 0;  // transposed convolution only
  int out_height = 1;      // dense only
  int out_width = 1;       // dense only
  Activation activation = Activation::kIdentity;
  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  LayerSpec spec;
  Shape3 in;
  Shape3 out;
  Matrix weight;  // dense: out x in; conv: Cout x (Cin k k); transposed: Cin x (Cout k k)
  Vector bias;    // one entry per output channel (dense: per output feature)
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
};

/// Activations recorded by a forward pass for reverse-mode differentiation.
struct Tape {
  std::vector<Matrix> inputs;  // input of each layer (features x batch)
  std::vector<Matrix> pre;     // pre-activation of each layer
  std::vector<Matrix> post;    // output of each layer
};

class Network {
 public:
  Network() = default;
  /// Throws ConfigError when consecutive layer shapes do not chain.
  Network(Shape3 input, std::vector<LayerSpec> specs);

  const Shape3& input_shape() const { return input_; }
  const Shape3& output_shape() const { return layers_.empty() ? input_ : layers_.back().out; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t parameter_count() const;

  /// Radius q of the latent ball for decoders; informational.
  double latent_bound() const { return latent_bound_; }
  void set_latent_bound(double q) { latent_bound_ = q; }

  /// LeCun-normal weights, zero biases.
  void init_random(std::uint64_t seed);
  void set_zero();
  /// Rounds every parameter to the nearest float so files round-trip exactly.
  void round_to_float();

  /// Columns of X are samples.
  Matrix forward(const Matrix& X) const;
  Matrix forward(const Matrix& X, Tape& tape) const;
  /// Reverse pass. Returns d<cotangent, f(X)>/dX; accumulates parameter
  /// gradients into grads when non-null.
  Matrix backward(const Tape& tape, const Matrix& cotangent, Gradients* grads) const;
  Gradients zero_gradients() const;

  /// Bias-free linear map of one layer and its adjoint (single sample).
  Vector apply_linear(int layer, const Vector& x) const;
  Vector apply_linear_adjoint(int layer, const Vector& y) const;

  bool operator==(const Network& other) const;

 private:
  Shape3 input_{};
  std::vector<Layer> layers_;
  double latent_bound_ = 0.0;
};

/// g(z) as an I x J map (decoder output must have one channel).
GridMatrix forward_decoder(const Network& decoder, const Vector& z);
/// d<cotangent, g(z)>/dz.
Vector grad_latent(const Network& decoder, const Vector& z, const GridMatrix& cotangent);

double activation_lipschitz(Activation a);

struct LipschitzReport {
  double product = 1.0;
  std::vector<double> spectral_norms;
  std::vector<double> activation_constants;
};

/// P = prod_l phi_l ||A_l||_2 with spectral norms by power iteration.
LipschitzReport lipschitz_product(const Network& net, double tolerance = 1e-6, int max_iterations = 500,
                                  std::uint64_t seed = 11);

/// Serialization: versioned header, little-endian 32-bit floats.
void write_network(std::ostream& os, const Network& net);
Network read_network(std::istream& is);
void save_weights(const Network& net, const std::string& path);
Network load_weights(const std::string& path);

// ---------------------------------------------------------------------------
// Autoencoder used for SLF completion.

enum class InputTransform : std::uint8_t {
  kLinear = 0,  // sensed values divided by their maximum
  kLog = 1,     // 1 + log10(value / max) / decades, floored, on sensed cells
};

struct ArchConfig {
  int rows = 32;
  int cols = 32;
  int latent_dim = 64;
  bool mask_channel = false;
  InputTransform input_transform = InputTransform::kLinear;
  double log_decades = 4.0;
};

struct Autoencoder {
  ArchConfig arch;
  Network encoder;
  Network decoder;
};

/// Desk-scale convolutional autoencoder (32 x 32 maps, D = 64, half the
/// channel counts of the reference design).
Autoencoder make_desk_autoencoder(const ArchConfig& arch);
/// Reference-size preset for 50 x 50 maps with D = 256.
Autoencoder make_full_autoencoder(const ArchConfig& arch);
/// Fully connected autoencoder for arbitrary grids; hidden widths given.
Autoencoder make_dense_autoencoder(const ArchConfig& arch, const std::vector<int>& hidden);

/// Encoder input for a masked map: channel 0 carries the transformed sensed
/// values, channel 1 (optional) the mask.
Vector encoder_input(const ArchConfig& arch, const GridMatrix& masked, const GridMatrix& mask);

struct SlfCompletion {
  Slf shape;      // decoder output g(p(P))
  double scale;   // least-squares gain fitting shape to P on the sensed cells
  Vector latent;  // p(P)
  Slf scaled() const;
};

SlfCompletion complete_slf(const Autoencoder& ae, const Slf& incomplete, const SensingMask& mask);
/// Mask inferred as the strictly positive cells of the input.
SlfCompletion complete_slf(const Autoencoder& ae, const Slf& incomplete);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.05;
  std::uint64_t seed = 3;
};

struct TrainState {
  std::vector<Matrix> m_weight, v_weight;
  std::vector<Vector> m_bias, v_bias;
  std::int64_t step = 0;
  int epoch = 0;  // completed epochs
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, Autoencoder last_finite)
      : NumericalError(what), last_finite_(std::move(last_finite)) {}
  const Autoencoder& last_finite() const { return last_finite_; }

 private:
  Autoencoder last_finite_;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on the masked completion loss
/// mean_n || f(M_n * Q_n) - Q_n / max(Q_n) ||_F^2. Continues from state when
/// it already holds moments; otherwise starts fresh.
std::vector<EpochStats> train_autoencoder(const std::vector<TrainingSample>& corpus, Autoencoder& ae,
                                          const TrainConfig& cfg, TrainState& state,
                                          const EpochCallback& on_epoch = {});

void save_autoencoder(const Autoencoder& ae, const std::string& path);
Autoencoder load_autoencoder(const std::string& path);
void write_autoencoder(std::ostream& os, const Autoencoder& ae);
Autoencoder read_autoencoder(std::istream& is);

void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

}  // namespace radiomap

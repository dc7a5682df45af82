#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace berry {

using State = std::vector<float>;

/// Fully connected layer. `weights` is out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weights;
  std::vector<float> biases;

  float weight(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
  std::size_t param_count() const { return weights.size() + biases.size(); }
  bool operator==(const DenseLayer&) const = default;
};

/// Symmetric signed 8-bit view of a DenseLayer. Codes hold the weights in
/// row-major order followed by the biases; -128 is never produced by
/// quantization but may appear after fault injection.
struct QuantizedLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::int8_t> codes;
  float scale = 1.0f;
  // When biases are kept out of the quantized memory they ride along here
  // untouched and `codes` covers the weights only.
  bool biases_quantized = true;
  std::vector<float> float_biases;

  bool operator==(const QuantizedLayer&) const = default;
};

struct QuantOptions {
  bool include_biases = true;
};

QuantizedLayer quantize_layer(const DenseLayer& layer, QuantOptions opts = {});
DenseLayer dequantize_layer(const QuantizedLayer& q);

/// Rounds half away from zero and clamps to [-127, 127].
std::int8_t quantize_value(double v, double scale);

/// Hook applied to each hidden activation vector during forward inference.
/// Used for optional activation-memory fault injection.
class ActivationTransform {
 public:
  virtual ~ActivationTransform() = default;
  virtual void apply(std::size_t hidden_index, std::span<double> activations) const = 0;
};

class QNetwork {
 public:
  QNetwork() = default;
  explicit QNetwork(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  /// Layer widths: input, hidden..., output.
  std::vector<std::size_t> arch() const;
  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t param_count() const;
  bool all_finite() const;

  bool operator==(const QNetwork&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Glorot-uniform weights, zero biases. Deterministic in (arch, seed).
QNetwork init_network(std::span<const std::size_t> arch, std::uint64_t seed);

/// Q-values for one state. Hidden layers use ReLU; the output layer is affine.
/// Arithmetic is carried out in double precision over the float parameters.
std::vector<double> forward(const QNetwork& net, std::span<const float> state,
                            const ActivationTransform* hook = nullptr);

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> biases;
  bool operator==(const LayerGradient&) const = default;
};

struct Gradient {
  std::vector<LayerGradient> layers;

  static Gradient zeros_like(const QNetwork& net);
  Gradient& operator+=(const Gradient& other);
  bool same_shape(const QNetwork& net) const;
  bool all_finite() const;
  bool operator==(const Gradient&) const = default;
};

struct TdSample {
  std::span<const float> state;
  std::size_t action = 0;
  double target = 0.0;
};

struct TdResult {
  double loss = 0.0;
  Gradient gradient;
};

/// Loss = sum_j (Q(s_j, a_j) - y_j)^2 and its exact gradient. Only the
/// selected action's output carries error back through the network.
TdResult td_gradient(const QNetwork& net, std::span<const TdSample> batch,
                     const ActivationTransform* hook = nullptr);

/// theta <- theta - alpha * (clean + perturbed). Throws NumericalError if the
/// result is not finite.
QNetwork apply_update(QNetwork net, const Gradient& clean, const Gradient& perturbed, double alpha);

std::size_t argmax_lowest(std::span<const double> values);

}  // namespace berry

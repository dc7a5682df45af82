#include "berry/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "berry/error.hpp"
#include "berry/rng.hpp"

namespace berry {

namespace {

void check_shapes(const std::vector<DenseLayer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.size() != l.in * l.out || l.biases.size() != l.out) {
      throw ShapeError("layer " + std::to_string(i) + " parameter arrays do not match its shape");
    }
    if (i > 0 && layers[i - 1].out != l.in) {
      throw ShapeError("layer " + std::to_string(i) + " input width does not match previous output");
    }
  }
}

}  // namespace

QNetwork::QNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_shapes(layers_); }

std::vector<std::size_t> QNetwork::arch() const {
  std::vector<std::size_t> widths;
  if (layers_.empty()) return widths;
  widths.push_back(layers_.front().in);
  for (const auto& l : layers_) widths.push_back(l.out);
  return widths;
}

std::size_t QNetwork::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

bool QNetwork::all_finite() const {
  for (const auto& l : layers_) {
    for (float w : l.weights)
      if (!std::isfinite(w)) return false;
    for (float b : l.biases)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

QNetwork init_network(std::span<const std::size_t> arch, std::uint64_t seed) {
  if (arch.size() < 2) throw ConfigError("network arch needs at least an input and an output width");
  for (auto w : arch)
    if (w == 0) throw ConfigError("network widths must be >= 1");

  Rng rng(derive_seed(seed, {0x51E7ULL}));
  std::vector<DenseLayer> layers;
  layers.reserve(arch.size() - 1);
  for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
    DenseLayer l;
    l.in = arch[i];
    l.out = arch[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    l.weights.resize(l.in * l.out);
    for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    l.biases.assign(l.out, 0.0f);
    layers.push_back(std::move(l));
  }
  return QNetwork(std::move(layers));
}

std::int8_t quantize_value(double v, double scale) {
  const double r = v / scale;
  double c = std::round(r);  // std::round is half away from zero
  c = std::clamp(c, -127.0, 127.0);
  return static_cast<std::int8_t>(c);
}

QuantizedLayer quantize_layer(const DenseLayer& layer, QuantOptions opts) {
  QuantizedLayer q;
  q.in = layer.in;
  q.out = layer.out;
  q.biases_quantized = opts.include_biases;

  float max_abs = 0.0f;
  for (float w : layer.weights) max_abs = std::max(max_abs, std::fabs(w));
  if (opts.include_biases)
    for (float b : layer.biases) max_abs = std::max(max_abs, std::fabs(b));
  q.scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
  if (!(q.scale > 0.0f)) q.scale = 1.0f;  // subnormal underflow

  q.codes.reserve(layer.weights.size() + (opts.include_biases ? layer.biases.size() : 0));
  for (float w : layer.weights) q.codes.push_back(quantize_value(w, q.scale));
  if (opts.include_biases) {
    for (float b : layer.biases) q.codes.push_back(quantize_value(b, q.scale));
  } else {
    q.float_biases = layer.biases;
  }
  return q;
}

DenseLayer dequantize_layer(const QuantizedLayer& q) {
  const std::size_t nw = q.in * q.out;
  const std::size_t expected = nw + (q.biases_quantized ? q.out : 0);
  if (q.codes.size() != expected) throw ShapeError("quantized layer code count does not match its shape");
  DenseLayer l;
  l.in = q.in;
  l.out = q.out;
  l.weights.resize(nw);
  for (std::size_t i = 0; i < nw; ++i) l.weights[i] = static_cast<float>(q.codes[i]) * q.scale;
  if (q.biases_quantized) {
    l.biases.resize(q.out);
    for (std::size_t i = 0; i < q.out; ++i) l.biases[i] = static_cast<float>(q.codes[nw + i]) * q.scale;
  } else {
    if (q.float_biases.size() != q.out) throw ShapeError("quantized layer is missing its float biases");
    l.biases = q.float_biases;
  }
  return l;
}

namespace {

// Affine map of one layer: out = W x + b.
void affine(const DenseLayer& l, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < l.out; ++r) {
    const float* row = l.weights.data() + r * l.in;
    double acc = l.biases[r];
    for (std::size_t c = 0; c < l.in; ++c) acc += static_cast<double>(row[c]) * x[c];
    out[r] = acc;
  }
}

}  // namespace

std::vector<double> forward(const QNetwork& net, std::span<const float> state, const ActivationTransform* hook) {
  const auto& layers = net.layers();
  if (layers.empty()) throw ShapeError("forward on an empty network");
  if (state.size() != net.input_size()) {
    std::ostringstream msg;
    msg << "state has " << state.size() << " features, network expects " << net.input_size();
    throw ShapeError(msg.str());
  }
  std::vector<double> x(state.begin(), state.end());
  std::vector<double> y;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    y.assign(layers[i].out, 0.0);
    affine(layers[i], x, y);
    if (i + 1 < layers.size()) {
      for (auto& v : y) v = v > 0.0 ? v : 0.0;
      if (hook) hook->apply(i, y);
    }
    x.swap(y);
  }
  return x;
}

Gradient Gradient::zeros_like(const QNetwork& net) {
  Gradient g;
  g.layers.reserve(net.layers().size());
  for (const auto& l : net.layers()) {
    g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.biases.size(), 0.0)});
  }
  return g;
}

Gradient& Gradient::operator+=(const Gradient& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient layer counts differ");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size())
      throw ShapeError("gradient shapes differ at layer " + std::to_string(i));
    for (std::size_t k = 0; k < a.weights.size(); ++k) a.weights[k] += b.weights[k];
    for (std::size_t k = 0; k < a.biases.size(); ++k) a.biases[k] += b.biases[k];
  }
  return *this;
}

bool Gradient::same_shape(const QNetwork& net) const {
  const auto& ls = net.layers();
  if (ls.size() != layers.size()) return false;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (ls[i].weights.size() != layers[i].weights.size() || ls[i].biases.size() != layers[i].biases.size())
      return false;
  }
  return true;
}

bool Gradient::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.weights)
      if (!std::isfinite(v)) return false;
    for (double v : l.biases)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

TdResult td_gradient(const QNetwork& net, std::span<const TdSample> batch, const ActivationTransform* hook) {
  if (batch.empty()) throw UsageError("td_gradient needs a non-empty batch");
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();

  TdResult result;
  result.gradient = Gradient::zeros_like(net);

  // acts[0] is the input; acts[i + 1] the post-activation output of layer i.
  std::vector<std::vector<double>> acts(depth + 1);
  std::vector<double> delta, prev_delta;

  for (const auto& sample : batch) {
    if (sample.state.size() != net.input_size()) throw ShapeError("batch state width does not match network input");
    if (sample.action >= net.output_size()) throw ShapeError("batch action index outside the output layer");
    if (!std::isfinite(sample.target)) throw UsageError("td_gradient target is not finite");

    acts[0].assign(sample.state.begin(), sample.state.end());
    for (std::size_t i = 0; i < depth; ++i) {
      acts[i + 1].assign(layers[i].out, 0.0);
      affine(layers[i], acts[i], acts[i + 1]);
      if (i + 1 < depth) {
        for (auto& v : acts[i + 1]) v = v > 0.0 ? v : 0.0;
        if (hook) hook->apply(i, acts[i + 1]);
      }
    }

    const double err = acts[depth][sample.action] - sample.target;
    result.loss += err * err;

    delta.assign(layers.back().out, 0.0);
    delta[sample.action] = 2.0 * err;
    for (std::size_t i = depth; i-- > 0;) {
      const auto& l = layers[i];
      auto& g = result.gradient.layers[i];
      const auto& x = acts[i];
      for (std::size_t r = 0; r < l.out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        g.biases[r] += d;
        double* grow = g.weights.data() + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) grow[c] += d * x[c];
      }
      if (i == 0) break;
      prev_delta.assign(l.in, 0.0);
      for (std::size_t r = 0; r < l.out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const float* row = l.weights.data() + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) prev_delta[c] += d * static_cast<double>(row[c]);
      }
      // ReLU derivative, taken as 0 at the kink.
      for (std::size_t c = 0; c < l.in; ++c)
        if (!(x[c] > 0.0)) prev_delta[c] = 0.0;
      delta.swap(prev_delta);
    }
  }
  return result;
}

QNetwork apply_update(QNetwork net, const Gradient& clean, const Gradient& perturbed, double alpha) {
  if (!(alpha > 0.0)) throw UsageError("learning rate must be positive");
  if (!clean.same_shape(net) || !perturbed.same_shape(net))
    throw ShapeError("gradient shape does not match network");
  auto& layers = net.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto& a = clean.layers[i];
    const auto& b = perturbed.layers[i];
    for (std::size_t k = 0; k < l.weights.size(); ++k)
      l.weights[k] = static_cast<float>(l.weights[k] - alpha * (a.weights[k] + b.weights[k]));
    for (std::size_t k = 0; k < l.biases.size(); ++k)
      l.biases[k] = static_cast<float>(l.biases[k] - alpha * (a.biases[k] + b.biases[k]));
  }
  if (!net.all_finite()) throw NumericalError("parameter update produced non-finite values");
  return net;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace berry

#include "dpmhp/network.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/kernels.hpp"
#include "dpmhp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpmhp {

std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  throw UsageError("unknown activation '" + std::string(name) + "'");
}

std::size_t NetworkSpec::layer_input(std::size_t l) const {
  return l == 0 ? input_dim : hidden_layers.at(l - 1);
}

std::size_t NetworkSpec::layer_output(std::size_t l) const {
  return l == hidden_layers.size() ? output_dim() : hidden_layers.at(l);
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layer_count(); ++l)
    total += layer_input(l) * layer_output(l) + layer_output(l);
  return total;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw DataError("network input_dim must be >= 1");
  if (n_hypotheses < 1) throw DataError("network needs at least one hypothesis");
  if (label_dim < 1) throw DataError("network label_dim must be >= 1");
  for (auto w : hidden_layers)
    if (w < 1) throw DataError("hidden layer widths must be >= 1");
}

NetworkParams::NetworkParams(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += spec_.layer_input(l) * spec_.layer_output(l) + spec_.layer_output(l);
  }
  data_.assign(off, 0.0);
}

std::span<double> NetworkParams::weights(std::size_t l) {
  return {data_.data() + offset(l), spec_.layer_input(l) * spec_.layer_output(l)};
}
std::span<const double> NetworkParams::weights(std::size_t l) const {
  return {data_.data() + offset(l), spec_.layer_input(l) * spec_.layer_output(l)};
}
std::span<double> NetworkParams::bias(std::size_t l) {
  return {data_.data() + offset(l) + spec_.layer_input(l) * spec_.layer_output(l), spec_.layer_output(l)};
}
std::span<const double> NetworkParams::bias(std::size_t l) const {
  return {data_.data() + offset(l) + spec_.layer_input(l) * spec_.layer_output(l), spec_.layer_output(l)};
}

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams params(spec);
  Engine eng = make_stream(seed, "network/init");
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_input(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : params.weights(l)) w = dist(eng);
  }
  return params;
}

namespace {

void activate(Activation a, std::span<double> v) {
  if (a == Activation::Tanh) {
    for (auto& z : v) z = std::tanh(z);
  } else {
    for (auto& z : v) z = z > 0.0 ? z : 0.0;
  }
}

// Multiplies the gradient w.r.t. a layer's output by the activation
// derivative, given the post-activation values.
void activation_backward(Activation a, std::span<const double> out, std::span<double> grad) {
  if (a == Activation::Tanh) {
    for (std::size_t i = 0; i < out.size(); ++i) grad[i] *= 1.0 - out[i] * out[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!(out[i] > 0.0)) grad[i] = 0.0;
  }
}

void check_finite(std::span<const double> v, std::size_t layer) {
  for (double z : v)
    if (!std::isfinite(z))
      throw NumericalError("non-finite activation in layer " + std::to_string(layer));
}

} // namespace

std::span<const double> forward(const NetworkParams& params, std::span<const double> x, NetworkWorkspace& ws) {
  const NetworkSpec& spec = params.spec();
  if (x.size() != spec.input_dim)
    throw DataError("feature dimension mismatch: expected " + std::to_string(spec.input_dim) + ", got " +
                    std::to_string(x.size()));
  const auto& k = kernels::active();
  const std::size_t layers = spec.layer_count();
  ws.activations.resize(layers + 1);
  ws.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_input(l);
    const std::size_t out = spec.layer_output(l);
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    const auto& prev = ws.activations[l];
    auto& z = ws.activations[l + 1];
    z.assign(b.begin(), b.end());
    for (std::size_t i = 0; i < in; ++i) k.axpy(prev[i], w.data() + i * out, z.data(), out);
    if (l + 1 < layers) activate(spec.activation, z);
    check_finite(z, l);
  }
  return ws.activations[layers];
}

HypothesisSet forward(const NetworkParams& params, std::span<const double> x) {
  NetworkWorkspace ws;
  const auto out = forward(params, x, ws);
  return HypothesisSet(std::vector<double>(out.begin(), out.end()), params.spec().label_dim);
}

WtaStep backward(const NetworkParams& params, std::span<const double> x, std::span<const double> y,
                 const WtaMetric& metric, double epsilon, std::span<double> grad, double scale,
                 NetworkWorkspace& ws) {
  const NetworkSpec& spec = params.spec();
  if (grad.size() != params.data().size()) throw DataError("gradient buffer does not match parameters");
  if (y.size() != spec.label_dim)
    throw DataError("label dimension mismatch: expected " + std::to_string(spec.label_dim) + ", got " +
                    std::to_string(y.size()));
  const auto out = forward(params, x, ws);

  ws.output_grad.assign(out.size(), 0.0);
  const WtaStep res = wta_step(out, spec.label_dim, y, metric, epsilon, ws.output_grad, scale);

  const auto& k = kernels::active();
  ws.delta = ws.output_grad;
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const std::size_t in = spec.layer_input(l);
    const std::size_t width = spec.layer_output(l);
    const auto& prev = ws.activations[l];
    const std::size_t off = params.offset(l);
    double* gw = grad.data() + off;
    double* gb = gw + in * width;
    for (std::size_t i = 0; i < in; ++i) k.axpy(prev[i], ws.delta.data(), gw + i * width, width);
    k.axpy(1.0, ws.delta.data(), gb, width);
    if (l == 0) break;
    const auto w = params.weights(l);
    ws.delta_prev.resize(in);
    for (std::size_t i = 0; i < in; ++i) ws.delta_prev[i] = k.dot(w.data() + i * width, ws.delta.data(), width);
    activation_backward(spec.activation, prev, ws.delta_prev);
    std::swap(ws.delta, ws.delta_prev);
  }
  return res;
}

std::pair<WtaResult, NetworkParams> backward(const NetworkParams& params, std::span<const double> x,
                                             std::span<const double> y, const WtaMetric& metric,
                                             double epsilon) {
  NetworkParams grad(params.spec());
  NetworkWorkspace ws;
  backward(params, x, y, metric, epsilon, grad.data(), 1.0, ws);
  // Recomputed on the forward output for the weight vector; same winner and loss.
  auto res = wta_accumulate(ws.activations.back(), params.spec().label_dim, y, metric, epsilon, {});
  return {std::move(res), std::move(grad)};
}

double gradient_check(const NetworkParams& params, std::span<const double> x, std::span<const double> y,
                      const WtaMetric& metric, double epsilon, double step, double floor) {
  const NetworkSpec& spec = params.spec();
  auto [res, grad] = backward(params, x, y, metric, epsilon);
  // Relaxed loss with the weights of the unperturbed winner.
  auto fixed_loss = [&](const NetworkParams& p) {
    const HypothesisSet h = forward(p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (res.weights[i] != 0.0) s += res.weights[i] * distance(metric, h[i], y);
    return s;
  };
  NetworkParams probe = params;
  double worst = 0.0;
  for (std::size_t k = 0; k < spec.parameter_count(); ++k) {
    const double keep = probe.data()[k];
    probe.data()[k] = keep + step;
    const double up = fixed_loss(probe);
    probe.data()[k] = keep - step;
    const double down = fixed_loss(probe);
    probe.data()[k] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double a = grad.data()[k];
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor}));
  }
  return worst;
}

} // namespace dpmhp

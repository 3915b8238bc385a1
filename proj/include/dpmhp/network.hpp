#pragma once

#include "dpmhp/metrics.hpp"
#include "dpmhp/wta_loss.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dpmhp {

enum class Activation { Tanh, ReLU };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Feed-forward shape: input_dim -> hidden... -> n_hypotheses * label_dim.
/// Hidden layers use `activation`; the output layer is linear.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers{64, 64};
  Activation activation = Activation::Tanh;
  std::size_t n_hypotheses = 1;
  std::size_t label_dim = 1;

  std::size_t output_dim() const noexcept { return n_hypotheses * label_dim; }
  std::size_t layer_count() const noexcept { return hidden_layers.size() + 1; }
  std::size_t layer_input(std::size_t l) const;
  std::size_t layer_output(std::size_t l) const;
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// All weights and biases in one contiguous vector.
///
/// Layer l occupies [offset(l), offset(l) + in*out + out): first the weight
/// matrix stored input-major (w[i*out + o] connects input i to output o),
/// then the bias vector.
class NetworkParams {
public:
  NetworkParams() = default;
  explicit NetworkParams(NetworkSpec spec);  // all zeros

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t offset(std::size_t layer) const { return offsets_.at(layer); }
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  bool operator==(const NetworkParams& other) const {
    return spec_ == other.spec_ && data_ == other.data_;
  }

private:
  NetworkSpec spec_;
  std::vector<double> data_;
  std::vector<std::size_t> offsets_;
};

/// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Reusable activation buffers for forward/backward.
struct NetworkWorkspace {
  std::vector<std::vector<double>> activations;  // [0] = input, [l+1] = output of layer l
  std::vector<double> delta;
  std::vector<double> delta_prev;
  std::vector<double> output_grad;
};

/// Hypotheses for one feature vector. The N*n outputs are read row-major
/// into N points of dimension n.
HypothesisSet forward(const NetworkParams& params, std::span<const double> x);

/// Raw output vector, activations kept in `ws`.
std::span<const double> forward(const NetworkParams& params, std::span<const double> x, NetworkWorkspace& ws);

/// Backpropagates the (relaxed) WTA loss of one training pair and adds
/// `scale` times its parameter gradient into `grad` (size
/// spec.parameter_count()). The winner is fixed at its forward value.
/// Throws NumericalError naming the layer if an activation is not finite.
WtaStep backward(const NetworkParams& params, std::span<const double> x, std::span<const double> y,
                 const WtaMetric& metric, double epsilon, std::span<double> grad, double scale,
                 NetworkWorkspace& ws);

/// Convenience form returning the gradient as a parameter-shaped object.
std::pair<WtaResult, NetworkParams> backward(const NetworkParams& params, std::span<const double> x,
                                             std::span<const double> y, const WtaMetric& metric,
                                             double epsilon);

/// Largest relative error |a - f| / max(|a|, |f|, floor) between backward()
/// and central differences of the relaxed loss, winner weights held at
/// their unperturbed values. Visits every parameter.
double gradient_check(const NetworkParams& params, std::span<const double> x, std::span<const double> y,
                      const WtaMetric& metric, double epsilon, double step = 1e-6, double floor = 1e-4);

} // namespace dpmhp

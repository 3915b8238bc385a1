#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace dpmhp {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

/// First-order update rule over one flat parameter vector.
class Optimizer {
public:
  Optimizer(OptimizerConfig cfg, std::size_t parameter_count);

  /// params -= step(grad) at the given learning rate.
  void step(std::span<double> params, std::span<const double> grad, double learning_rate);

  std::size_t steps_taken() const noexcept { return t_; }

private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

} // namespace dpmhp

#include "dpmhp/optimizer.hpp"

#include "dpmhp/error.hpp"

#include <cmath>
#include <string>

namespace dpmhp {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw UsageError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t parameter_count) : cfg_(cfg) {
  if (cfg_.kind == OptimizerKind::Adam) {
    m_.assign(parameter_count, 0.0);
    v_.assign(parameter_count, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  if (params.size() != grad.size()) throw DataError("optimizer: gradient/parameter size mismatch");
  ++t_;
  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grad[i];
    return;
  }
  if (m_.size() != params.size()) throw DataError("optimizer: parameter count changed");
  const double t = static_cast<double>(t_);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
  const double step = learning_rate * std::sqrt(bias2) / bias1;
  const double eps_hat = cfg_.eps * std::sqrt(bias2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + eps_hat);
  }
}

} // namespace dpmhp

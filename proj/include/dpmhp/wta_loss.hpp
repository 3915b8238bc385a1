#pragma once

#include "dpmhp/metrics.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dpmhp {

/// N hypotheses of dimension n, stored row-major.
class HypothesisSet {
public:
  HypothesisSet() = default;
  HypothesisSet(std::size_t count, std::size_t dim);
  HypothesisSet(std::vector<double> flat, std::size_t dim);
  static HypothesisSet from_points(const std::vector<Point>& points);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : flat_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return flat_.empty(); }

  std::span<const double> operator[](std::size_t i) const { return {flat_.data() + i * dim_, dim_}; }
  std::span<double> operator[](std::size_t i) { return {flat_.data() + i * dim_, dim_}; }

  std::span<const double> flat() const noexcept { return flat_; }
  std::span<double> flat() noexcept { return flat_; }
  std::vector<Point> to_points() const;

  bool operator==(const HypothesisSet&) const = default;

private:
  std::vector<double> flat_;
  std::size_t dim_ = 0;
};

struct WtaResult {
  double loss = 0.0;           // distance from the winner to the observation
  std::size_t winner = 0;      // lowest index attaining the minimum
  std::vector<double> weights; // 1 - eps at the winner, eps / (N - 1) elsewhere
  double relaxed_loss = 0.0;   // sum_i weights[i] * d(y_i, y); equals loss when eps == 0
};

/// Winner-takes-all loss of one observation against a hypothesis set.
WtaResult wta_evaluate(const HypothesisSet& hyps, std::span<const double> y, const WtaMetric& metric,
                       double epsilon = 0.0);

/// Gradient of the relaxed loss with respect to each hypothesis, winner held fixed.
std::vector<Point> wta_gradients(const HypothesisSet& hyps, std::span<const double> y,
                                 const WtaMetric& metric, double epsilon = 0.0);

/// Flat-buffer form used in the training loops. `hyps` is row-major N x dim;
/// adds `scale` times the gradient into `grad` (same shape) and returns the
/// result. Hypotheses with zero weight are skipped.
WtaResult wta_accumulate(std::span<const double> hyps, std::size_t dim, std::span<const double> y,
                         const WtaMetric& metric, double epsilon, std::span<double> grad,
                         double scale = 1.0);

/// Allocation-free form of wta_accumulate for training loops: same winner,
/// loss and gradient, without materializing the weight vector.
struct WtaStep {
  double loss = 0.0;
  std::size_t winner = 0;
  double relaxed_loss = 0.0;
};
WtaStep wta_step(std::span<const double> hyps, std::size_t dim, std::span<const double> y, const WtaMetric& metric,
                 double epsilon, std::span<double> grad, double scale = 1.0);

/// Index of the nearest row (squared Euclidean, lowest index on ties).
std::size_t nearest_index(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                          double* squared_norm = nullptr);

} // namespace dpmhp

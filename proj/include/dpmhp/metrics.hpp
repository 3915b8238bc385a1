#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpmhp {

/// A label-space element, hypothesis, or sample. Dimension fixed per run.
using Point = std::vector<double>;

enum class MetricKind { SquaredEuclidean, LogDistance };

/// Distance used inside the WTA loss.
///
/// LogDistance is log(||a - b|| + delta) with the Euclidean norm and the
/// natural log. Its minimum, log(delta), is attained at a == b.
struct WtaMetric {
  MetricKind kind = MetricKind::SquaredEuclidean;
  double delta = 1e-3;

  static WtaMetric squared_euclidean() { return {MetricKind::SquaredEuclidean, 0.0}; }
  static WtaMetric log_distance(double delta);

  /// Distance expressed through the squared Euclidean norm of a - b. Both
  /// metrics are monotone in it, which is what lets the WTA winner be
  /// computed from squared norms alone.
  double from_squared_norm(double squared_norm) const;

  /// Same metric after scaling all of label space by `factor` (delta scales with it).
  WtaMetric rescaled(double factor) const;

  void validate() const;
};

std::string_view to_string(MetricKind kind);
MetricKind metric_kind_from_string(std::string_view name);  // "l2" | "ldp" (aliases accepted)

double squared_distance(std::span<const double> a, std::span<const double> b);
double log_distance(std::span<const double> a, std::span<const double> b, double delta);
double distance(const WtaMetric& metric, std::span<const double> a, std::span<const double> b);

/// Gradient of d(a, b) with respect to a, written into `out` (size n).
/// LogDistance returns the zero vector at a == b.
void metric_gradient(const WtaMetric& metric, std::span<const double> a, std::span<const double> b,
                     std::span<double> out);
Point metric_gradient(const WtaMetric& metric, std::span<const double> a, std::span<const double> b);

/// Max pairwise Euclidean distance over (at most) the first `subsample` points
/// of a deterministic stride through `points` (row-major, `dim` columns).
double estimate_diameter(std::span<const double> points, std::size_t dim, std::size_t subsample = 1000);

/// 1e-3 times the estimated data diameter; 1e-3 if the data are degenerate.
double default_delta(std::span<const double> points, std::size_t dim);

} // namespace dpmhp

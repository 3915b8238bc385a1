#include "dpmhp/metrics.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace dpmhp {
namespace {

void check_dims(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DataError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}

void check_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw DataError("log distance needs delta > 0, got " + std::to_string(delta));
}

} // namespace

WtaMetric WtaMetric::log_distance(double delta) {
  check_delta(delta);
  return {MetricKind::LogDistance, delta};
}

double WtaMetric::from_squared_norm(double squared_norm) const {
  if (kind == MetricKind::SquaredEuclidean) return squared_norm;
  return std::log(std::sqrt(squared_norm) + delta);
}

WtaMetric WtaMetric::rescaled(double factor) const {
  WtaMetric m = *this;
  if (kind == MetricKind::LogDistance) m.delta = delta * factor;
  return m;
}

void WtaMetric::validate() const {
  if (kind == MetricKind::LogDistance) check_delta(delta);
}

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::SquaredEuclidean ? "l2" : "ldp";
}

MetricKind metric_kind_from_string(std::string_view name) {
  if (name == "l2" || name == "squared_euclidean") return MetricKind::SquaredEuclidean;
  if (name == "ldp" || name == "log" || name == "log_distance") return MetricKind::LogDistance;
  throw UsageError("unknown metric '" + std::string(name) + "' (expected l2 or ldp)");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_dims(a, b);
  double out = 0.0;
  kernels::active().squared_distances(a.data(), 1, a.size(), b.data(), &out);
  return out;
}

double log_distance(std::span<const double> a, std::span<const double> b, double delta) {
  check_delta(delta);
  return std::log(std::sqrt(squared_distance(a, b)) + delta);
}

double distance(const WtaMetric& metric, std::span<const double> a, std::span<const double> b) {
  if (metric.kind == MetricKind::SquaredEuclidean) return squared_distance(a, b);
  return log_distance(a, b, metric.delta);
}

void metric_gradient(const WtaMetric& metric, std::span<const double> a, std::span<const double> b,
                     std::span<double> out) {
  check_dims(a, b);
  check_dims(a, out);
  const std::size_t n = a.size();
  if (metric.kind == MetricKind::SquaredEuclidean) {
    for (std::size_t j = 0; j < n; ++j) out[j] = 2.0 * (a[j] - b[j]);
    return;
  }
  const double r = std::sqrt(squared_distance(a, b));
  if (r == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double scale = 1.0 / (r * (r + metric.delta));
  for (std::size_t j = 0; j < n; ++j) out[j] = (a[j] - b[j]) * scale;
}

Point metric_gradient(const WtaMetric& metric, std::span<const double> a, std::span<const double> b) {
  Point out(a.size());
  metric_gradient(metric, a, b, out);
  return out;
}

double estimate_diameter(std::span<const double> points, std::size_t dim, std::size_t subsample) {
  if (dim == 0 || points.size() % dim != 0) throw DataError("estimate_diameter: bad shape");
  const std::size_t count = points.size() / dim;
  if (count < 2) return 0.0;
  const std::size_t take = std::min(count, subsample);
  const std::size_t stride = count / take;
  std::vector<double> sub;
  sub.reserve(take * dim);
  for (std::size_t i = 0; i < take; ++i) {
    const double* p = points.data() + i * stride * dim;
    sub.insert(sub.end(), p, p + dim);
  }
  std::vector<double> d2(take);
  double best = 0.0;
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < take; ++i) {
    k.squared_distances(sub.data(), take, dim, sub.data() + i * dim, d2.data());
    best = std::max(best, *std::max_element(d2.begin(), d2.end()));
  }
  return std::sqrt(best);
}

double default_delta(std::span<const double> points, std::size_t dim) {
  const double diameter = estimate_diameter(points, dim);
  return diameter > 0.0 ? 1e-3 * diameter : 1e-3;
}

} // namespace dpmhp

#pragma once

#include "dpmhp/metrics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dpmhp {

/// Paired features and labels, both row-major. feature_dim may be 0 for
/// unconditional data.
struct Dataset {
  std::size_t feature_dim = 0;
  std::size_t label_dim = 1;
  std::vector<double> features;
  std::vector<double> labels;

  std::size_t size() const noexcept { return label_dim == 0 ? 0 : labels.size() / label_dim; }
  std::span<const double> feature(std::size_t i) const { return {features.data() + i * feature_dim, feature_dim}; }
  std::span<const double> label(std::size_t i) const { return {labels.data() + i * label_dim, label_dim}; }
  void validate() const;
};

/// Erlang interarrival model for the call-center example. The call rate
/// varies sinusoidally over the time of day x in [x_min, x_max] and peaks
/// at the middle of the interval.
struct CallCenterModel {
  double lambda0 = 1.0;
  double alpha = 0.5;
  double x_min = 6.0;
  double x_max = 20.0;
  int shape = 5;

  double rate(double x) const;           // lambda0 * (1 + alpha * sin(pi (x - x_min) / (x_max - x_min)))
  double conditional_mean(double x) const { return shape / rate(x); }
  double conditional_variance(double x) const { return shape / (rate(x) * rate(x)); }
  void validate() const;
};

struct MixtureComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct MixtureModel {
  std::vector<MixtureComponent> components;
  std::size_t dim() const { return components.empty() ? 0 : static_cast<std::size_t>(components.front().mean.size()); }
  void validate() const;
  double density(std::span<const double> y) const;
};

/// Three-component 2-D mixture with weights (0.5, 0.3, 0.2) and anisotropic
/// covariances: a smooth density with both dense and sparse regions.
MixtureModel fig1_mixture();

/// Single standard normal component in `dim` dimensions.
MixtureModel standard_normal(std::size_t dim = 1);

double erlang_pdf(double y, double lambda, int k);
double erlang_cdf(double y, double lambda, int k);

/// x ~ U[x_min, x_max], y = sum of `shape` exponentials of rate lambda(x).
Dataset sample_call_center(const CallCenterModel& model, std::size_t count, std::uint64_t seed);

/// Draws y | x for a fixed x.
std::vector<double> sample_call_center_at(const CallCenterModel& model, double x, std::size_t count,
                                          std::uint64_t seed);

/// Unconditional draws (feature_dim == 0 in the returned Dataset's sense; returned flat, row-major).
std::vector<double> sample_mixture(const MixtureModel& model, std::size_t count, std::uint64_t seed);

/// Conditional mixture used in place of the motion-prediction data: 4-D
/// features, 2-D labels from a two-component Gaussian mixture whose
/// parameters depend smoothly on x. See README for the formulas.
struct SurrogateComponents {
  double weight[2];
  Eigen::Vector2d mean[2];
  Eigen::Vector2d sigma[2];  // axis-aligned standard deviations
};
SurrogateComponents surrogate_components(std::span<const double> x);
MixtureModel surrogate_mixture(std::span<const double> x);
Dataset sample_conditional_surrogate(std::size_t count, std::uint64_t seed);

} // namespace dpmhp

#pragma once

#include "dpmhp/datasets.hpp"
#include "dpmhp/mhp_model.hpp"
#include "dpmhp/wta_loss.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpmhp {

/// Fraction of samples whose nearest hypothesis is each index.
struct ShareReport {
  std::vector<double> shares;
  std::vector<std::size_t> counts;
  double max_share = 0.0;
  double min_share = 0.0;
  double chi_square_vs_uniform = 0.0;  // sample_count * N * sum_i (share_i - 1/N)^2
  std::size_t sample_count = 0;

  /// Fraction of hypotheses with share in [lo / N, hi / N].
  double fraction_within(double lo, double hi) const;
};

/// Euclidean nearest-hypothesis assignment (lowest index on ties) of every
/// sample. `threads` > 1 splits the samples; counts are exact either way.
ShareReport voronoi_shares(const HypothesisSet& hyps, std::span<const double> samples, unsigned threads = 1);

/// Bounded or polynomial test function b(y) compared between the hypothesis
/// average and a reference sample average.
struct MomentProbe {
  enum class Kind { Coordinate, SecondMoment, BoxIndicator };
  Kind kind = Kind::Coordinate;
  std::size_t coord = 0;
  Point lo, hi;

  static MomentProbe coordinate(std::size_t j) { return {Kind::Coordinate, j, {}, {}}; }
  static MomentProbe second_moment(std::size_t j) { return {Kind::SecondMoment, j, {}, {}}; }
  static MomentProbe box(Point lo, Point hi);

  double operator()(std::span<const double> y) const;
};

double moment_probe_gap(const HypothesisSet& hyps, const MomentProbe& probe, std::span<const double> reference);

struct MomentRow {
  double x = 0.0;
  double hyp_mean = 0.0;
  double hyp_var = 0.0;  // population variance of the N hypotheses
  double true_mean = 0.0;
  double true_var = 0.0;
};

/// Hypothesis mean/variance of a 1-D-in, 1-D-out model against the Erlang truth.
std::vector<MomentRow> conditional_moment_curve(const MhpModel& model, std::span<const double> x_grid,
                                                const CallCenterModel& truth);

/// Mean over the grid of |hyp - truth| / truth for the mean and the variance.
struct MomentErrors {
  double mean_rel_error = 0.0;
  double var_rel_error = 0.0;
};
MomentErrors moment_curve_errors(const std::vector<MomentRow>& rows);

/// KS distance between the empirical CDF of 1-D hypotheses and the CDF of
/// density^exponent, normalized on the grid by trapezoid integration. The
/// grid must be increasing; the CDF is linear between grid points.
double density_exponent_ks(const HypothesisSet& hyps, std::span<const double> grid,
                           std::span<const double> density, double exponent);

enum class EstimatorKind { Norm, Kde };

struct NllReport {
  EstimatorKind estimator = EstimatorKind::Norm;
  std::vector<double> bandwidth;  // KDE only; per dimension (Scott's rule when auto)
  double nll_per_sample = 0.0;
  std::size_t test_count = 0;
};

/// -log N(y; mean, cov) with mean and population covariance of the
/// hypotheses, diagonal loaded by 1e-9 * trace / n.
double norm_negative_log_density(const HypothesisSet& hyps, std::span<const double> y);

/// Per-dimension bandwidths: Scott's rule N^(-1/(n+4)) * sd_d when
/// `bandwidth` is empty, otherwise the given value in every dimension.
std::vector<double> kde_bandwidth(const HypothesisSet& hyps, std::optional<double> bandwidth);

/// -log of the Gaussian product-kernel density estimate at y.
double kde_negative_log_density(const HypothesisSet& hyps, std::span<const double> y,
                                std::span<const double> bandwidth);

NllReport nll_norm(const HypothesisSet& hyps, std::span<const double> test, unsigned threads = 1);
NllReport nll_kde(const HypothesisSet& hyps, std::span<const double> test, std::optional<double> bandwidth = {},
                  unsigned threads = 1);

/// Conditional NLL: hypotheses are predicted per test feature vector and
/// both estimators are evaluated at the observed label.
struct ConditionalNll {
  NllReport norm;
  NllReport kde;
};
ConditionalNll conditional_nll(const MhpModel& model, const Dataset& test, unsigned threads = 1);

struct Table1Result {
  ConditionalNll l2;
  ConditionalNll ldp;
};

/// Trains one model per config on `train` (configs must agree on every
/// hyperparameter except the metric) and evaluates both on `test`.
Table1Result table1_protocol(const Dataset& train, const Dataset& test, const NetworkSpec& spec,
                             const TrainConfig& cfg_l2, const TrainConfig& cfg_ldp, unsigned threads = 1);

bool same_hyperparameters(const TrainConfig& a, const TrainConfig& b);

std::string to_string(EstimatorKind kind);

} // namespace dpmhp

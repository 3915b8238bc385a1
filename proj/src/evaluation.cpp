#include "dpmhp/evaluation.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace dpmhp {
namespace {

// Runs body(i) for i in [0, count), split into contiguous chunks. Callers
// write per-index results and reduce sequentially afterwards, so the
// outcome does not depend on the thread count.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
  if (threads <= 1 || count < 2 * threads) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
}

std::size_t checked_rows(std::span<const double> flat, std::size_t dim, const char* what) {
  if (dim == 0 || flat.size() % dim != 0)
    throw DataError(std::string(what) + " do not match the hypothesis dimension");
  return flat.size() / dim;
}

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

} // namespace

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::Norm ? "norm" : "kde"; }

// ---- Voronoi shares ----

double ShareReport::fraction_within(double lo, double hi) const {
  if (shares.empty()) return 0.0;
  const double n = static_cast<double>(shares.size());
  const auto inside = std::count_if(shares.begin(), shares.end(),
                                    [&](double s) { return s >= lo / n && s <= hi / n; });
  return static_cast<double>(inside) / n;
}

ShareReport voronoi_shares(const HypothesisSet& hyps, std::span<const double> samples, unsigned threads) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  const std::size_t dim = hyps.dim();
  const std::size_t count = checked_rows(samples, dim, "samples");
  if (count == 0) throw DataError("no samples to assign");

  std::vector<std::size_t> owner(count);
  parallel_for(count, threads, [&](std::size_t i) {
    owner[i] = nearest_index(hyps.flat(), dim, samples.subspan(i * dim, dim));
  });

  ShareReport r;
  r.sample_count = count;
  r.counts.assign(hyps.size(), 0);
  for (auto o : owner) ++r.counts[o];
  const double n = static_cast<double>(hyps.size());
  r.shares.resize(hyps.size());
  double chi = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    r.shares[i] = static_cast<double>(r.counts[i]) / static_cast<double>(count);
    chi += (r.shares[i] - 1.0 / n) * (r.shares[i] - 1.0 / n);
  }
  r.chi_square_vs_uniform = static_cast<double>(count) * n * chi;
  r.max_share = *std::max_element(r.shares.begin(), r.shares.end());
  r.min_share = *std::min_element(r.shares.begin(), r.shares.end());
  return r;
}

// ---- moment probes ----

MomentProbe MomentProbe::box(Point lo, Point hi) {
  if (lo.size() != hi.size() || lo.empty()) throw DataError("box bounds must have equal, nonzero dimension");
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (!(lo[j] < hi[j])) throw DataError("box needs lo < hi in every coordinate");
  return {Kind::BoxIndicator, 0, std::move(lo), std::move(hi)};
}

double MomentProbe::operator()(std::span<const double> y) const {
  switch (kind) {
  case Kind::Coordinate:
    return y[coord];
  case Kind::SecondMoment:
    return y[coord] * y[coord];
  case Kind::BoxIndicator:
    for (std::size_t j = 0; j < lo.size(); ++j)
      if (y[j] < lo[j] || y[j] > hi[j]) return 0.0;
    return 1.0;
  }
  return 0.0;
}

double moment_probe_gap(const HypothesisSet& hyps, const MomentProbe& probe, std::span<const double> reference) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  const std::size_t dim = hyps.dim();
  const std::size_t count = checked_rows(reference, dim, "reference samples");
  if (count == 0) throw DataError("no reference samples");
  if (probe.kind != MomentProbe::Kind::BoxIndicator && probe.coord >= dim)
    throw DataError("probe coordinate out of range");
  if (probe.kind == MomentProbe::Kind::BoxIndicator && probe.lo.size() != dim)
    throw DataError("probe box dimension mismatch");
  double h = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) h += probe(hyps[i]);
  double r = 0.0;
  for (std::size_t i = 0; i < count; ++i) r += probe(reference.subspan(i * dim, dim));
  return std::abs(h / static_cast<double>(hyps.size()) - r / static_cast<double>(count));
}

// ---- conditional moments ----

std::vector<MomentRow> conditional_moment_curve(const MhpModel& model, std::span<const double> x_grid,
                                                const CallCenterModel& truth) {
  if (model.spec.input_dim != 1 || model.spec.label_dim != 1)
    throw DataError("moment curves need a model with 1-D features and 1-D labels");
  truth.validate();
  std::vector<MomentRow> rows;
  NetworkWorkspace ws;
  for (double x : x_grid) {
    if (x < truth.x_min || x > truth.x_max) throw DataError("x grid leaves the call-center interval");
    const HypothesisSet h = model.predict(std::span<const double>(&x, 1), ws);
    const auto v = h.flat();
    double mean = 0.0;
    for (double y : v) mean += y;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double y : v) var += (y - mean) * (y - mean);
    var /= static_cast<double>(v.size());
    rows.push_back({x, mean, var, truth.conditional_mean(x), truth.conditional_variance(x)});
  }
  return rows;
}

MomentErrors moment_curve_errors(const std::vector<MomentRow>& rows) {
  MomentErrors e;
  if (rows.empty()) return e;
  for (const auto& r : rows) {
    e.mean_rel_error += std::abs(r.hyp_mean - r.true_mean) / r.true_mean;
    e.var_rel_error += std::abs(r.hyp_var - r.true_var) / r.true_var;
  }
  e.mean_rel_error /= static_cast<double>(rows.size());
  e.var_rel_error /= static_cast<double>(rows.size());
  return e;
}

// ---- density exponent ----

double density_exponent_ks(const HypothesisSet& hyps, std::span<const double> grid,
                           std::span<const double> density, double exponent) {
  if (hyps.empty() || hyps.dim() != 1) throw DataError("density_exponent_ks needs 1-D hypotheses");
  if (grid.size() < 2 || grid.size() != density.size()) throw DataError("density grid is malformed");
  std::vector<double> cdf(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(density[k] >= 0.0) || !std::isfinite(density[k])) throw DataError("density must be finite and >= 0");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw DataError("density grid must be increasing");
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double a = std::pow(density[k - 1], exponent);
    const double b = std::pow(density[k], exponent);
    cdf[k] = cdf[k - 1] + 0.5 * (a + b) * (grid[k] - grid[k - 1]);
  }
  const double total = cdf.back();
  if (!(total > 0.0) || !std::isfinite(total)) throw DataError("density is not normalizable on the grid");
  for (auto& c : cdf) c /= total;

  auto model_cdf = [&](double h) {
    if (h <= grid.front()) return 0.0;
    if (h >= grid.back()) return 1.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), h);
    const std::size_t k = static_cast<std::size_t>(it - grid.begin());
    const double t = (h - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return cdf[k - 1] + t * (cdf[k] - cdf[k - 1]);
  };

  std::vector<double> h(hyps.flat().begin(), hyps.flat().end());
  std::sort(h.begin(), h.end());
  const double n = static_cast<double>(h.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double f = model_cdf(h[i]);
    ks = std::max({ks, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return ks;
}

// ---- NLL ----

double norm_negative_log_density(const HypothesisSet& hyps, std::span<const double> y) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  const auto n = static_cast<Eigen::Index>(hyps.dim());
  if (y.size() != hyps.dim()) throw DataError("test point dimension mismatch");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> h(
      hyps.flat().data(), static_cast<Eigen::Index>(hyps.size()), n);
  const Eigen::RowVectorXd mean = h.colwise().mean();
  const Eigen::MatrixXd centered = h.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(hyps.size());
  const double load = 1e-9 * cov.trace() / static_cast<double>(n);
  cov.diagonal().array() += load;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(load > 0.0))
    throw NumericalError("hypothesis covariance is singular");
  const Eigen::Map<const Eigen::VectorXd> v(y.data(), n);
  const Eigen::VectorXd z = llt.matrixL().solve(v - mean.transpose());
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  return 0.5 * z.squaredNorm() + 0.5 * log_det + 0.5 * static_cast<double>(n) * kLog2Pi;
}

std::vector<double> kde_bandwidth(const HypothesisSet& hyps, std::optional<double> bandwidth) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  const std::size_t n = hyps.dim();
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw DataError("KDE bandwidth must be > 0");
    return std::vector<double>(n, *bandwidth);
  }
  const std::size_t count = hyps.size();
  if (count < 2) throw DataError("automatic KDE bandwidth needs at least two hypotheses; pass a bandwidth");
  const double factor = std::pow(static_cast<double>(count), -1.0 / (static_cast<double>(n) + 4.0));
  std::vector<double> bw(n);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += hyps[i][j];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (hyps[i][j] - mean) * (hyps[i][j] - mean);
    var /= static_cast<double>(count - 1);
    if (!(var > 0.0))
      throw DataError("hypotheses have zero variance in dimension " + std::to_string(j) +
                      "; pass an explicit KDE bandwidth");
    bw[j] = factor * std::sqrt(var);
  }
  return bw;
}

double kde_negative_log_density(const HypothesisSet& hyps, std::span<const double> y,
                                std::span<const double> bandwidth) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  const std::size_t n = hyps.dim();
  if (y.size() != n || bandwidth.size() != n) throw DataError("test point dimension mismatch");
  const std::size_t count = hyps.size();
  std::vector<double> scaled(count * n);
  std::vector<double> query(n);
  double log_norm = 0.5 * static_cast<double>(n) * kLog2Pi + std::log(static_cast<double>(count));
  for (std::size_t j = 0; j < n; ++j) {
    query[j] = y[j] / bandwidth[j];
    log_norm += std::log(bandwidth[j]);
  }
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < n; ++j) scaled[i * n + j] = hyps[i][j] / bandwidth[j];
  std::vector<double> z2(count);
  kernels::active().squared_distances(scaled.data(), count, n, query.data(), z2.data());
  const double min_z2 = *std::min_element(z2.begin(), z2.end());
  double sum = 0.0;
  for (double v : z2) sum += std::exp(-0.5 * (v - min_z2));
  return 0.5 * min_z2 - std::log(sum) + log_norm;
}

NllReport nll_norm(const HypothesisSet& hyps, std::span<const double> test, unsigned threads) {
  const std::size_t count = checked_rows(test, hyps.dim(), "test points");
  if (count == 0) throw DataError("empty test set");
  std::vector<double> v(count);
  parallel_for(count, threads, [&](std::size_t i) { v[i] = norm_negative_log_density(hyps, test.subspan(i * hyps.dim(), hyps.dim())); });
  NllReport r;
  r.estimator = EstimatorKind::Norm;
  r.test_count = count;
  for (double x : v) r.nll_per_sample += x;
  r.nll_per_sample /= static_cast<double>(count);
  return r;
}

NllReport nll_kde(const HypothesisSet& hyps, std::span<const double> test, std::optional<double> bandwidth,
                  unsigned threads) {
  const std::size_t count = checked_rows(test, hyps.dim(), "test points");
  if (count == 0) throw DataError("empty test set");
  const auto bw = kde_bandwidth(hyps, bandwidth);
  std::vector<double> v(count);
  parallel_for(count, threads, [&](std::size_t i) { v[i] = kde_negative_log_density(hyps, test.subspan(i * hyps.dim(), hyps.dim()), bw); });
  NllReport r;
  r.estimator = EstimatorKind::Kde;
  r.bandwidth = bw;
  r.test_count = count;
  for (double x : v) r.nll_per_sample += x;
  r.nll_per_sample /= static_cast<double>(count);
  return r;
}

ConditionalNll conditional_nll(const MhpModel& model, const Dataset& test, unsigned threads) {
  test.validate();
  if (test.size() == 0) throw DataError("empty test set");
  if (test.feature_dim != model.spec.input_dim || test.label_dim != model.spec.label_dim)
    throw DataError("test set dimensions do not match the model");
  const std::size_t count = test.size();
  std::vector<double> norm(count), kde(count);
  // Scott bandwidths vary per x; report their average.
  std::vector<double> bw_sum(count * test.label_dim);
  parallel_for(count, threads, [&](std::size_t i) {
    thread_local NetworkWorkspace ws;
    const HypothesisSet h = model.predict(test.feature(i), ws);
    norm[i] = norm_negative_log_density(h, test.label(i));
    const auto bw = kde_bandwidth(h, std::nullopt);
    kde[i] = kde_negative_log_density(h, test.label(i), bw);
    std::copy(bw.begin(), bw.end(), bw_sum.begin() + static_cast<std::ptrdiff_t>(i * test.label_dim));
  });
  ConditionalNll out;
  out.norm.estimator = EstimatorKind::Norm;
  out.kde.estimator = EstimatorKind::Kde;
  out.norm.test_count = out.kde.test_count = count;
  out.kde.bandwidth.assign(test.label_dim, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    out.norm.nll_per_sample += norm[i];
    out.kde.nll_per_sample += kde[i];
    for (std::size_t j = 0; j < test.label_dim; ++j) out.kde.bandwidth[j] += bw_sum[i * test.label_dim + j];
  }
  out.norm.nll_per_sample /= static_cast<double>(count);
  out.kde.nll_per_sample /= static_cast<double>(count);
  for (auto& b : out.kde.bandwidth) b /= static_cast<double>(count);
  return out;
}

bool same_hyperparameters(const TrainConfig& a, const TrainConfig& b) {
  return a.epsilon.initial == b.epsilon.initial && a.epsilon.anneal_fraction == b.epsilon.anneal_fraction &&
         a.learning_rate == b.learning_rate && a.lr_decay == b.lr_decay && a.lr_decay_every == b.lr_decay_every &&
         a.optimizer.kind == b.optimizer.kind && a.optimizer.beta1 == b.optimizer.beta1 &&
         a.optimizer.beta2 == b.optimizer.beta2 && a.optimizer.eps == b.optimizer.eps &&
         a.batch_size == b.batch_size && a.epochs == b.epochs && a.seed == b.seed &&
         a.bias_from_labels == b.bias_from_labels;
}

Table1Result table1_protocol(const Dataset& train_data, const Dataset& test, const NetworkSpec& spec,
                             const TrainConfig& cfg_l2, const TrainConfig& cfg_ldp, unsigned threads) {
  if (test.size() == 0) throw DataError("empty test set");
  if (!same_hyperparameters(cfg_l2, cfg_ldp))
    throw UsageError("table1 protocol needs identical hyperparameters apart from the metric");
  Table1Result r;
  r.l2 = conditional_nll(train(spec, train_data, cfg_l2).model, test, threads);
  r.ldp = conditional_nll(train(spec, train_data, cfg_ldp).model, test, threads);
  return r;
}

} // namespace dpmhp

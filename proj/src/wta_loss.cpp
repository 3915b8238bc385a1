#include "dpmhp/wta_loss.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/kernels.hpp"

#include <string>

namespace dpmhp {

HypothesisSet::HypothesisSet(std::size_t count, std::size_t dim) : flat_(count * dim, 0.0), dim_(dim) {
  if (dim == 0) throw DataError("hypothesis dimension must be >= 1");
}

HypothesisSet::HypothesisSet(std::vector<double> flat, std::size_t dim) : flat_(std::move(flat)), dim_(dim) {
  if (dim == 0 || flat_.size() % dim != 0)
    throw DataError("hypothesis buffer of size " + std::to_string(flat_.size()) +
                    " is not a multiple of dimension " + std::to_string(dim));
}

HypothesisSet HypothesisSet::from_points(const std::vector<Point>& points) {
  if (points.empty()) throw DataError("empty hypothesis set");
  const std::size_t dim = points.front().size();
  std::vector<double> flat;
  flat.reserve(points.size() * dim);
  for (const auto& p : points) {
    if (p.size() != dim) throw DataError("hypotheses of mixed dimension");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return HypothesisSet(std::move(flat), dim);
}

std::vector<Point> HypothesisSet::to_points() const {
  std::vector<Point> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.emplace_back((*this)[i].begin(), (*this)[i].end());
  return out;
}

namespace {

std::vector<double>& scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

void check_shape(std::span<const double> hyps, std::size_t dim, std::span<const double> y) {
  if (hyps.empty()) throw DataError("empty hypothesis set");
  if (dim == 0 || hyps.size() % dim != 0) throw DataError("hypothesis buffer has bad shape");
  if (y.size() != dim)
    throw DataError("dimension mismatch: hypotheses have " + std::to_string(dim) +
                    ", observation has " + std::to_string(y.size()));
}

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw DataError("relaxation epsilon must lie in [0, 1), got " + std::to_string(epsilon));
}

} // namespace

std::size_t nearest_index(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                          double* squared_norm) {
  check_shape(rows, dim, query);
  const std::size_t count = rows.size() / dim;
  auto& d2 = scratch();
  d2.resize(count);
  kernels::active().squared_distances(rows.data(), count, dim, query.data(), d2.data());
  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i)
    if (d2[i] < d2[best]) best = i;
  if (squared_norm) *squared_norm = d2[best];
  return best;
}

// The winner is the lowest index with the smallest squared norm; both
// metrics are nondecreasing in it, so only the winner's distance is needed
// when epsilon == 0.
WtaStep wta_step(std::span<const double> hyps, std::size_t dim, std::span<const double> y, const WtaMetric& metric,
                 double epsilon, std::span<double> grad, double scale) {
  check_shape(hyps, dim, y);
  check_epsilon(epsilon);
  if (!grad.empty() && grad.size() != hyps.size()) throw DataError("gradient buffer has bad shape");
  const std::size_t count = hyps.size() / dim;
  auto& sq = scratch();
  sq.resize(count);
  const auto& k = kernels::active();
  k.squared_distances(hyps.data(), count, dim, y.data(), sq.data());

  WtaStep res;
  for (std::size_t i = 1; i < count; ++i)
    if (sq[i] < sq[res.winner]) res.winner = i;
  res.loss = metric.from_squared_norm(sq[res.winner]);

  const bool relaxed = epsilon > 0.0 && count > 1;
  const double w_win = relaxed ? 1.0 - epsilon : 1.0;
  const double w_other = relaxed ? epsilon / static_cast<double>(count - 1) : 0.0;
  res.relaxed_loss = w_win * res.loss;
  if (relaxed) {
    for (std::size_t i = 0; i < count; ++i)
      if (i != res.winner) res.relaxed_loss += w_other * metric.from_squared_norm(sq[i]);
  }

  if (!grad.empty()) {
    double g[16];
    std::vector<double> big;
    double* buf = g;
    if (dim > 16) {
      big.resize(dim);
      buf = big.data();
    }
    for (std::size_t i = 0; i < count; ++i) {
      const double w = i == res.winner ? w_win : w_other;
      if (w == 0.0) continue;
      metric_gradient(metric, hyps.subspan(i * dim, dim), y, {buf, dim});
      k.axpy(scale * w, buf, grad.data() + i * dim, dim);
    }
  }
  return res;
}

WtaResult wta_accumulate(std::span<const double> hyps, std::size_t dim, std::span<const double> y,
                         const WtaMetric& metric, double epsilon, std::span<double> grad, double scale) {
  const WtaStep step = wta_step(hyps, dim, y, metric, epsilon, grad, scale);
  const std::size_t count = hyps.size() / dim;
  WtaResult res;
  res.loss = step.loss;
  res.winner = step.winner;
  res.relaxed_loss = step.relaxed_loss;
  res.weights.assign(count, count > 1 ? epsilon / static_cast<double>(count - 1) : 0.0);
  res.weights[res.winner] = count > 1 ? 1.0 - epsilon : 1.0;
  return res;
}

WtaResult wta_evaluate(const HypothesisSet& hyps, std::span<const double> y, const WtaMetric& metric,
                       double epsilon) {
  return wta_accumulate(hyps.flat(), hyps.dim(), y, metric, epsilon, {});
}

std::vector<Point> wta_gradients(const HypothesisSet& hyps, std::span<const double> y,
                                 const WtaMetric& metric, double epsilon) {
  std::vector<double> grad(hyps.flat().size(), 0.0);
  wta_accumulate(hyps.flat(), hyps.dim(), y, metric, epsilon, grad);
  return HypothesisSet(std::move(grad), hyps.dim()).to_points();
}

} // namespace dpmhp

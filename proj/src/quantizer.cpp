#include "dpmhp/quantizer.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dpmhp {

TrainConfig quantizer_defaults() {
  TrainConfig cfg;
  cfg.epsilon.initial = 0.0;
  cfg.learning_rate = 1e-2;
  cfg.lr_decay = 0.5;
  cfg.lr_decay_every = 25;
  cfg.epochs = 100;
  cfg.batch_size = 256;
  return cfg;
}

namespace {

std::size_t checked_count(std::span<const double> samples, std::size_t dim) {
  if (dim == 0 || samples.size() % dim != 0) throw DataError("sample buffer has bad shape");
  return samples.size() / dim;
}

} // namespace

double mean_wta_loss(std::span<const double> samples, std::size_t dim, const HypothesisSet& hyps,
                     const WtaMetric& metric) {
  const std::size_t count = checked_count(samples, dim);
  if (count == 0) throw DataError("no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    total += wta_step(hyps.flat(), hyps.dim(), samples.subspan(i * dim, dim), metric, 0.0, {}).loss;
  return total / static_cast<double>(count);
}

HypothesisSet fit_hypotheses(std::span<const double> samples, std::size_t dim, std::size_t n_hypotheses,
                             const WtaMetric& metric, const TrainConfig& cfg, std::vector<double>* epoch_loss) {
  const std::size_t count = checked_count(samples, dim);
  if (n_hypotheses < 1) throw DataError("need at least one hypothesis");
  if (n_hypotheses > count)
    throw DataError("cannot place " + std::to_string(n_hypotheses) + " hypotheses on " + std::to_string(count) +
                    " samples");
  // N distinct sample indices by partial Fisher-Yates.
  Engine init = make_stream(cfg.seed, "quantizer/init");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> start(n_hypotheses * dim);
  for (std::size_t i = 0; i < n_hypotheses; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(init)]);
    std::copy_n(samples.data() + idx[i] * dim, dim, start.data() + i * dim);
  }
  return fit_hypotheses_from(samples, dim, HypothesisSet(std::move(start), dim), metric, cfg, epoch_loss);
}

HypothesisSet fit_hypotheses_from(std::span<const double> samples, std::size_t dim, const HypothesisSet& init,
                                  const WtaMetric& metric, const TrainConfig& cfg, std::vector<double>* epoch_loss) {
  const std::size_t count = checked_count(samples, dim);
  if (count == 0) throw DataError("no samples");
  if (init.empty() || init.dim() != dim) throw DataError("initial hypotheses do not match sample dimension");
  metric.validate();
  cfg.validate();
  const std::size_t n_hypotheses = init.size();

  const LabelFrame frame = LabelFrame::fit(samples, dim);
  std::vector<double> data(samples.size());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      data[i * dim + j] = (samples[i * dim + j] - frame.center[j]) / frame.scale;
  const WtaMetric internal = metric.rescaled(1.0 / frame.scale);

  std::vector<double> hyps(init.flat().begin(), init.flat().end());
  for (std::size_t i = 0; i < n_hypotheses; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      hyps[i * dim + j] = (hyps[i * dim + j] - frame.center[j]) / frame.scale;

  Optimizer opt(cfg.optimizer, hyps.size());
  std::vector<double> grad(hyps.size());
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine shuffle = make_stream(cfg.seed, "quantizer/shuffle");

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double eps = cfg.epsilon.at(epoch, cfg.epochs);
    const double lr = cfg.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < count; start += cfg.batch_size) {
      const std::size_t stop = std::min(count, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b)
        loss_sum += wta_step(hyps, dim, {data.data() + order[b] * dim, dim}, internal, eps, grad, scale).loss;
      opt.step(hyps, grad, lr);
    }
    const double mean = loss_sum / static_cast<double>(count);
    if (!std::isfinite(mean))
      throw NumericalError("quantizer diverged in epoch " + std::to_string(epoch));
    if (epoch_loss) {
      epoch_loss->push_back(metric.kind == MetricKind::SquaredEuclidean ? mean * frame.scale * frame.scale
                                                                        : mean + std::log(frame.scale));
    }
  }

  for (std::size_t i = 0; i < n_hypotheses; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      hyps[i * dim + j] = frame.center[j] + frame.scale * hyps[i * dim + j];
  return HypothesisSet(std::move(hyps), dim);
}

HypothesisSet lloyd_refine(std::span<const double> samples, std::size_t dim, HypothesisSet hyps,
                           const WtaMetric& metric, std::size_t iterations, std::vector<double>* loss_trace) {
  const std::size_t count = checked_count(samples, dim);
  if (count == 0) throw DataError("no samples");
  if (hyps.empty() || hyps.dim() != dim) throw DataError("hypothesis set does not match sample dimension");
  metric.validate();
  const std::size_t n_hyp = hyps.size();
  constexpr double kDamping = 0.5;

  std::vector<std::size_t> owner(count);
  std::vector<double> sq(count);
  auto assign = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      owner[i] = nearest_index(hyps.flat(), dim, samples.subspan(i * dim, dim), &sq[i]);
      total += metric.from_squared_norm(sq[i]);
    }
    return total / static_cast<double>(count);
  };

  double loss = assign();
  if (loss_trace) loss_trace->push_back(loss);

  std::vector<double> acc(n_hyp * dim);
  std::vector<double> mass(n_hyp);
  std::vector<char> pinned(n_hyp);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(pinned.begin(), pinned.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t h = owner[i];
      double w = 1.0;
      if (metric.kind == MetricKind::LogDistance) {
        const double r = std::sqrt(sq[i]);
        if (r == 0.0) {
          // A sample sitting on the hypothesis makes it the exact minimizer's limit.
          pinned[h] = 1;
          continue;
        }
        w = 1.0 / (r * (r + metric.delta));
      }
      mass[h] += w;
      for (std::size_t j = 0; j < dim; ++j) acc[h * dim + j] += w * samples[i * dim + j];
    }

    std::vector<std::size_t> empty;
    for (std::size_t h = 0; h < n_hyp; ++h) {
      if (pinned[h]) continue;
      if (mass[h] == 0.0) {
        empty.push_back(h);
        continue;
      }
      auto p = hyps[h];
      for (std::size_t j = 0; j < dim; ++j) {
        const double target = acc[h * dim + j] / mass[h];
        p[j] = metric.kind == MetricKind::SquaredEuclidean ? target : p[j] + kDamping * (target - p[j]);
      }
    }
    for (std::size_t h : empty) {
      const auto far = static_cast<std::size_t>(std::max_element(sq.begin(), sq.end()) - sq.begin());
      std::copy_n(samples.data() + far * dim, dim, hyps[h].data());
      sq[far] = 0.0;
    }

    loss = assign();
    if (loss_trace) loss_trace->push_back(loss);
  }
  return hyps;
}

} // namespace dpmhp

#pragma once

#include "dpmhp/mhp_model.hpp"
#include "dpmhp/wta_loss.hpp"

#include <span>
#include <vector>

namespace dpmhp {

/// Defaults for unconditional fitting: Adam at 1e-2, halved every 25
/// epochs, 100 epochs, batch 256, no relaxation.
TrainConfig quantizer_defaults();

/// Places N hypotheses by minimizing the mean WTA loss over `samples`
/// (row-major, `dim` columns) with mini-batch stochastic gradients.
/// Hypotheses start at N distinct random samples. The optimization runs in
/// a centered, isotropically scaled frame so the learning rate is relative
/// to the data spread. `cfg.metric` is ignored in favour of `metric`.
HypothesisSet fit_hypotheses(std::span<const double> samples, std::size_t dim, std::size_t n_hypotheses,
                             const WtaMetric& metric, const TrainConfig& cfg,
                             std::vector<double>* epoch_loss = nullptr);

/// Same optimization started from a given hypothesis set instead of random samples.
HypothesisSet fit_hypotheses_from(std::span<const double> samples, std::size_t dim, const HypothesisSet& init,
                                  const WtaMetric& metric, const TrainConfig& cfg,
                                  std::vector<double>* epoch_loss = nullptr);

/// Batch alternation: assign samples to their nearest hypothesis, then move
/// each hypothesis towards the minimizer of its cell's summed distance.
/// SquaredEuclidean moves to the cell mean. LogDistance takes a half step
/// towards the reweighted cell mean with weights 1 / (r (r + delta)), the
/// minimizer of the quadratic majorizer of log(r + delta) at the current
/// point. Empty cells are re-seeded at the sample farthest from its
/// nearest hypothesis. `loss_trace`, when given, receives the mean WTA loss
/// before the first and after every iteration.
HypothesisSet lloyd_refine(std::span<const double> samples, std::size_t dim, HypothesisSet hyps,
                           const WtaMetric& metric, std::size_t iterations,
                           std::vector<double>* loss_trace = nullptr);

/// Mean WTA loss (epsilon = 0) of a hypothesis set over samples.
double mean_wta_loss(std::span<const double> samples, std::size_t dim, const HypothesisSet& hyps,
                     const WtaMetric& metric);

} // namespace dpmhp

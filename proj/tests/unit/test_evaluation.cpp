#include "dpmhp/datasets.hpp"
#include "dpmhp/error.hpp"
#include "dpmhp/evaluation.hpp"
#include "dpmhp/quantizer.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace dpmhp;
using doctest::Approx;

namespace {

constexpr double kHalfLog2Pi = 0.918938533204672742;

std::vector<double> uniform_samples(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(count);
  for (auto& x : v) x = u(eng);
  return v;
}

} // namespace

TEST_CASE("voronoi_shares examples") {
  auto s = uniform_samples(100000, 1);
  auto one = voronoi_shares(HypothesisSet::from_points({{0.3}}), s);
  CHECK(one.shares == std::vector<double>{1.0});
  CHECK(one.chi_square_vs_uniform == 0.0);

  auto half = voronoi_shares(HypothesisSet::from_points({{0.25}, {0.75}}), s);
  CHECK(half.shares[0] == Approx(0.5).epsilon(0.02));
  CHECK(half.shares[0] + half.shares[1] == Approx(1.0).epsilon(1e-12));
  CHECK(half.sample_count == 100000);

  auto twins = voronoi_shares(HypothesisSet::from_points({{0.5}, {0.5}}), s);
  CHECK(twins.counts[0] == 100000);
  CHECK(twins.counts[1] == 0);
  CHECK(twins.min_share == 0.0);

  std::vector<double> three{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(voronoi_shares(HypothesisSet::from_points({{0.0, 0.0}}), three), DataError);
  CHECK_THROWS_AS(voronoi_shares(HypothesisSet::from_points({{0.0}}), std::vector<double>{}), DataError);
}

TEST_CASE("share statistics") {
  auto s = uniform_samples(50000, 2);
  auto hyps = HypothesisSet::from_points({{0.1}, {0.2}, {0.6}, {0.9}});
  auto r = voronoi_shares(hyps, s);
  double chi = 0.0;
  for (double sh : r.shares) chi += (sh - 0.25) * (sh - 0.25);
  CHECK(r.chi_square_vs_uniform == Approx(50000.0 * 4.0 * chi));
  int within = 0;
  for (double sh : r.shares) within += sh >= 0.5 / 4 && sh <= 2.0 / 4;
  CHECK(r.fraction_within(0.5, 2.0) == within / 4.0);
  CHECK(r.max_share == *std::max_element(r.shares.begin(), r.shares.end()));
  // threads only split the work
  auto par = voronoi_shares(hyps, s, 4);
  CHECK(par.counts == r.counts);
}

TEST_CASE("moment probes") {
  auto ref = uniform_samples(200, 3);
  auto same = HypothesisSet(ref, 1);
  for (auto probe : {MomentProbe::coordinate(0), MomentProbe::second_moment(0), MomentProbe::box({0.2}, {0.7})})
    CHECK(moment_probe_gap(same, probe, ref) == Approx(0.0).scale(1.0));

  std::vector<double> sym{-2.0, 2.0, -1.0, 1.0};
  CHECK(moment_probe_gap(HypothesisSet::from_points({{-1.5}, {1.5}}), MomentProbe::coordinate(0), sym) ==
        Approx(0.0).scale(1.0));
  CHECK(MomentProbe::box({0.0}, {1.0})(std::vector<double>{0.5}) == 1.0);
  CHECK(MomentProbe::box({0.0}, {1.0})(std::vector<double>{1.5}) == 0.0);
  CHECK_THROWS_AS(MomentProbe::box({1.0}, {0.0}), DataError);
}

TEST_CASE("box-probe gap shrinks with N for the ldp quantizer") {
  auto train = sample_mixture(standard_normal(1), 20000, 5);
  auto ref = sample_mixture(standard_normal(1), 100000, 6);
  // delta well below the cell width at N=200
  const auto metric = WtaMetric::log_distance(1e-5);
  const auto probe = MomentProbe::box({-0.7}, {0.9});
  std::vector<double> small, large;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = quantizer_defaults();
    cfg.seed = seed;
    small.push_back(moment_probe_gap(fit_hypotheses(train, 1, 25, metric, cfg), probe, ref));
    large.push_back(moment_probe_gap(fit_hypotheses(train, 1, 200, metric, cfg), probe, ref));
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  CHECK(large[2] < small[2]);
}

TEST_CASE("density_exponent_ks") {
  std::vector<double> grid, dens;
  for (double x = -6.0; x <= 6.0; x += 0.001) {
    grid.push_back(x);
    dens.push_back(std::exp(-0.5 * x * x));
  }
  // hypotheses at the quantiles of p^e
  for (double e : {1.0, 1.0 / 3.0}) {
    const double sd = 1.0 / std::sqrt(e);
    const std::size_t n = 100;
    std::vector<double> h;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = (i + 0.5) / n;
      // bisection on the normal CDF
      double lo = -10, hi = 10;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / (sd * std::numbers::sqrt2)) < q ? lo : hi) = mid;
      }
      h.push_back(lo);
    }
    CHECK(density_exponent_ks(HypothesisSet(h, 1), grid, dens, e) <= 0.5 / n + 1e-3);
  }

  // i.i.d. samples of p
  auto iid = sample_mixture(standard_normal(1), 1000, 8);
  CHECK(density_exponent_ks(HypothesisSet(iid, 1), grid, dens, 1.0) < 0.05);

  // l2 quantizer follows p^(1/3)
  auto train = sample_mixture(standard_normal(1), 20000, 9);
  auto h = fit_hypotheses(train, 1, 100, WtaMetric::squared_euclidean(), quantizer_defaults());
  CHECK(density_exponent_ks(h, grid, dens, 1.0 / 3.0) < density_exponent_ks(h, grid, dens, 1.0));

  // affine reparameterization
  std::vector<double> grid2, dens2, h2;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid2.push_back(3.0 * grid[k] - 1.0);
    dens2.push_back(dens[k] / 3.0);
  }
  for (double v : h.flat()) h2.push_back(3.0 * v - 1.0);
  CHECK(density_exponent_ks(HypothesisSet(h2, 1), grid2, dens2, 1.0 / 3.0) ==
        Approx(density_exponent_ks(h, grid, dens, 1.0 / 3.0)).epsilon(1e-9));

  std::vector<double> zeros(grid.size(), 0.0);
  CHECK_THROWS_AS(density_exponent_ks(h, grid, zeros, 1.0), DataError);
}

TEST_CASE("Norm NLL") {
  auto draws = sample_mixture(standard_normal(1), 200000, 10);
  auto r = nll_norm(HypothesisSet(draws, 1), std::vector<double>{0.0});
  CHECK(r.nll_per_sample == Approx(kHalfLog2Pi).epsilon(2e-3));
  CHECK(r.test_count == 1);

  auto hyps = HypothesisSet::from_points({{0.0, 1.0}, {2.0, 0.0}, {1.0, 3.0}, {-1.0, 1.0}});
  std::vector<double> mean{0.5, 1.25};
  const double at_mean = norm_negative_log_density(hyps, mean);
  std::mt19937_64 eng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> y{d(eng), d(eng)};
    CHECK(norm_negative_log_density(hyps, y) >= at_mean);
    // translation invariance
    HypothesisSet moved = hyps;
    for (std::size_t k = 0; k < 4; ++k) {
      moved[k][0] += 5.0;
      moved[k][1] -= 2.0;
    }
    std::vector<double> ym{y[0] + 5.0, y[1] - 2.0};
    CHECK(norm_negative_log_density(moved, ym) == Approx(norm_negative_log_density(hyps, y)));
  }
  CHECK_THROWS_AS(nll_norm(hyps, std::vector<double>{}), DataError);
}

TEST_CASE("KDE NLL") {
  auto single = HypothesisSet::from_points({{1.7}});
  auto r = nll_kde(single, std::vector<double>{1.7}, 1.0);
  CHECK(r.nll_per_sample == Approx(kHalfLog2Pi));
  CHECK(r.bandwidth == std::vector<double>{1.0});

  // integrates to one
  auto hyps = HypothesisSet::from_points({{-1.0}, {0.0}, {0.3}, {2.0}});
  const auto bw = kde_bandwidth(hyps, std::nullopt);
  double s = 0.0;
  const double h = 0.001;
  for (double y = -15.0; y <= 15.0; y += h) s += std::exp(-kde_negative_log_density(hyps, std::vector<double>{y}, bw));
  CHECK(s * h == Approx(1.0).epsilon(1e-3));

  // Scott's rule: N^(-1/(n+4)) * sample sd
  double m = (-1.0 + 0.0 + 0.3 + 2.0) / 4.0, v = 0.0;
  for (double x : {-1.0, 0.0, 0.3, 2.0}) v += (x - m) * (x - m);
  CHECK(bw[0] == Approx(std::pow(4.0, -0.2) * std::sqrt(v / 3.0)));

  // a wider kernel reaches a far outlier
  std::vector<double> outlier{12.0};
  CHECK(kde_negative_log_density(hyps, outlier, std::vector<double>{2.0}) <
        kde_negative_log_density(hyps, outlier, std::vector<double>{1.0}));

  CHECK_THROWS_AS(nll_kde(HypothesisSet::from_points({{1.0}, {1.0}}), std::vector<double>{0.0}), DataError);
  CHECK_THROWS_AS(nll_kde(hyps, std::vector<double>{0.0}, -1.0), DataError);
}

TEST_CASE("conditional moment curve") {
  auto data = sample_call_center(CallCenterModel{}, 3000, 1);
  NetworkSpec spec;
  spec.hidden_layers = {8};
  spec.n_hypotheses = 1;
  TrainConfig cfg;
  cfg.metric = WtaMetric::squared_euclidean();
  cfg.epochs = 3;
  auto r = train(spec, data, cfg);
  std::vector<double> grid{6.0, 13.0, 20.0};
  auto rows = conditional_moment_curve(r.model, grid, CallCenterModel{});
  REQUIRE(rows.size() == 3);
  for (auto& row : rows) CHECK(row.hyp_var == 0.0);
  CHECK(rows[1].true_mean == Approx(5.0 / 1.5));
  CHECK(rows[1].true_var == Approx(5.0 / 2.25));
  std::vector<double> outside{21.0};
  CHECK_THROWS_AS(conditional_moment_curve(r.model, outside, CallCenterModel{}), DataError);

  std::vector<MomentRow> fake{{6.0, 1.1, 0.0, 1.0, 2.0}, {7.0, 0.8, 3.0, 1.0, 2.0}};
  auto e = moment_curve_errors(fake);
  CHECK(e.mean_rel_error == Approx(0.15));
  CHECK(e.var_rel_error == Approx(0.75));
}

TEST_CASE("paired l2/ldp NLL protocol") {
  auto train = sample_conditional_surrogate(1500, 1);
  auto test = sample_conditional_surrogate(200, 2);
  NetworkSpec spec;
  spec.input_dim = 4;
  spec.hidden_layers = {16};
  spec.n_hypotheses = 10;
  spec.label_dim = 2;
  TrainConfig l2;
  l2.metric = WtaMetric::squared_euclidean();
  l2.epochs = 2;
  TrainConfig ldp = l2;
  ldp.metric = {MetricKind::LogDistance, 0.0};
  CHECK(same_hyperparameters(l2, ldp));
  auto r = table1_protocol(train, test, spec, l2, ldp, 2);
  CHECK(r.l2.norm.test_count == 200);
  CHECK(std::isfinite(r.ldp.kde.nll_per_sample));
  CHECK(r.l2.kde.bandwidth.size() == 2);

  // swapping the metric labels swaps the reports
  auto swapped = table1_protocol(train, test, spec, ldp, l2, 2);
  CHECK(swapped.l2.norm.nll_per_sample == r.ldp.norm.nll_per_sample);
  CHECK(swapped.ldp.kde.nll_per_sample == r.l2.kde.nll_per_sample);

  TrainConfig other = ldp;
  other.learning_rate *= 2;
  CHECK_THROWS_AS(table1_protocol(train, test, spec, l2, other), UsageError);
  Dataset empty;
  empty.feature_dim = 4;
  empty.label_dim = 2;
  CHECK_THROWS_AS(table1_protocol(train, empty, spec, l2, ldp), DataError);
}

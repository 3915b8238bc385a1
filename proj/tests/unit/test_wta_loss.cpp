#include "dpmhp/error.hpp"
#include "dpmhp/wta_loss.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace dpmhp;
using doctest::Approx;

namespace {

HypothesisSet random_set(std::mt19937_64& eng, std::size_t count, std::size_t dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> flat(count * dim);
  for (auto& v : flat) v = dist(eng);
  return HypothesisSet(std::move(flat), dim);
}

Point random_point(std::mt19937_64& eng, std::size_t dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Point p(dim);
  for (auto& v : p) v = dist(eng);
  return p;
}

} // namespace

TEST_CASE("wta_evaluate examples") {
  auto r = wta_evaluate(HypothesisSet::from_points({{1}, {2}}), Point{1.2}, WtaMetric::squared_euclidean());
  CHECK(r.loss == Approx(0.04));
  CHECK(r.winner == 0);

  r = wta_evaluate(HypothesisSet::from_points({{0}, {2}}), Point{1}, WtaMetric::squared_euclidean());
  CHECK(r.winner == 0);
  CHECK(r.loss == 1.0);

  r = wta_evaluate(HypothesisSet::from_points({{0}, {10}}), Point{0}, WtaMetric::log_distance(0.01));
  CHECK(r.winner == 0);
  CHECK(r.loss == Approx(-4.605170).epsilon(1e-6));

  CHECK_THROWS_AS(wta_evaluate(HypothesisSet(), Point{0}, WtaMetric::squared_euclidean()), DataError);
  CHECK_THROWS_AS(wta_evaluate(HypothesisSet::from_points({{0}}), Point{0}, WtaMetric::squared_euclidean(), 1.0),
                  DataError);
}

TEST_CASE("relaxation weights") {
  auto hyps = HypothesisSet::from_points({{0}, {1}, {2}, {3}, {4}});
  auto r = wta_evaluate(hyps, Point{2.1}, WtaMetric::squared_euclidean(), 0.2);
  CHECK(r.winner == 2);
  CHECK(r.weights[2] == Approx(0.8));
  CHECK(r.weights[0] == Approx(0.05));
  CHECK(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) == Approx(1.0));
  double relaxed = 0.0;
  for (std::size_t i = 0; i < 5; ++i) relaxed += r.weights[i] * (hyps[i][0] - 2.1) * (hyps[i][0] - 2.1);
  CHECK(r.relaxed_loss == Approx(relaxed));

  // single hypothesis takes all the weight
  auto one = wta_evaluate(HypothesisSet::from_points({{3}}), Point{0}, WtaMetric::squared_euclidean(), 0.2);
  CHECK(one.weights == std::vector<double>{1.0});
}

TEST_CASE("wta_gradients examples") {
  auto g = wta_gradients(HypothesisSet::from_points({{1}, {5}}), Point{0}, WtaMetric::squared_euclidean());
  CHECK(g[0] == Point{2});
  CHECK(g[1] == Point{0});

  std::mt19937_64 eng(11);
  auto hyps = random_set(eng, 6, 3);
  auto y = random_point(eng, 3);
  for (auto metric : {WtaMetric::squared_euclidean(), WtaMetric::log_distance(0.05)}) {
    auto r = wta_evaluate(hyps, y, metric);
    auto grads = wta_gradients(hyps, y, metric);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      if (i == r.winner) continue;
      CHECK(std::all_of(grads[i].begin(), grads[i].end(), [](double v) { return v == 0.0; }));
    }
  }
}

TEST_CASE("relaxed gradient matches finite differences with the winner held fixed") {
  std::mt19937_64 eng(5);
  const double h = 1e-6;
  for (auto metric : {WtaMetric::squared_euclidean(), WtaMetric::log_distance(0.01)}) {
    for (int trial = 0; trial < 20; ++trial) {
      auto hyps = random_set(eng, 4, 2);
      auto y = random_point(eng, 2);
      const double eps = 0.05;
      auto base = wta_evaluate(hyps, y, metric, eps);
      auto grads = wta_gradients(hyps, y, metric, eps);
      auto relaxed = [&](const HypothesisSet& hs) {
        double s = 0.0;
        for (std::size_t i = 0; i < hs.size(); ++i) s += base.weights[i] * distance(metric, hs[i], y);
        return s;
      };
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          auto hp = hyps, hm = hyps;
          hp[i][j] += h;
          hm[i][j] -= h;
          const double fd = (relaxed(hp) - relaxed(hm)) / (2 * h);
          CHECK(std::abs(fd - grads[i][j]) <= 1e-6 * std::max(std::abs(fd), 1e-2));
        }
    }
  }
}

TEST_CASE("wta_evaluate equals the brute-force minimum") {
  std::mt19937_64 eng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n_hyp = 1 + trial % 64;
    const std::size_t dim = 1 + trial % 3;
    auto hyps = random_set(eng, n_hyp, dim);
    auto y = random_point(eng, dim);
    for (auto metric : {WtaMetric::squared_euclidean(), WtaMetric::log_distance(1e-3)}) {
      std::size_t best = 0;
      double best_d = distance(metric, hyps[0], y);
      for (std::size_t i = 1; i < n_hyp; ++i) {
        const double d = distance(metric, hyps[i], y);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      auto r = wta_evaluate(hyps, y, metric);
      REQUIRE(r.winner == best);
      REQUIRE(r.loss == best_d);
    }
  }
}

TEST_CASE("winner is the same under both metrics") {
  std::mt19937_64 eng(12);
  for (int trial = 0; trial < 500; ++trial) {
    auto hyps = random_set(eng, 10, 2);
    auto y = random_point(eng, 2);
    CHECK(wta_evaluate(hyps, y, WtaMetric::squared_euclidean()).winner ==
          wta_evaluate(hyps, y, WtaMetric::log_distance(0.01)).winner);
  }
}

TEST_CASE("permuting hypotheses permutes winner and gradients") {
  std::mt19937_64 eng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto hyps = random_set(eng, 8, 2);
    auto y = random_point(eng, 2);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), eng);
    HypothesisSet shuffled(8, 2);
    for (std::size_t i = 0; i < 8; ++i) std::copy_n(hyps[perm[i]].begin(), 2, shuffled[i].begin());
    const auto metric = WtaMetric::log_distance(0.01);
    auto a = wta_evaluate(hyps, y, metric);
    auto b = wta_evaluate(shuffled, y, metric);
    CHECK(perm[b.winner] == a.winner);
    CHECK(a.loss == b.loss);
    auto ga = wta_gradients(hyps, y, metric, 0.1);
    auto gb = wta_gradients(shuffled, y, metric, 0.1);
    for (std::size_t i = 0; i < 8; ++i) CHECK(gb[i] == ga[perm[i]]);
  }
}

TEST_CASE("loss is invariant under rigid motions") {
  std::mt19937_64 eng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto hyps = random_set(eng, 6, 2);
    auto y = random_point(eng, 2);
    const double th = u(eng), tx = u(eng), ty = u(eng);
    auto move = [&](std::span<const double> p) {
      return Point{std::cos(th) * p[0] - std::sin(th) * p[1] + tx, std::sin(th) * p[0] + std::cos(th) * p[1] + ty};
    };
    std::vector<Point> moved;
    for (std::size_t i = 0; i < hyps.size(); ++i) moved.push_back(move(hyps[i]));
    for (auto metric : {WtaMetric::squared_euclidean(), WtaMetric::log_distance(0.01)}) {
      auto a = wta_evaluate(hyps, y, metric);
      auto b = wta_evaluate(HypothesisSet::from_points(moved), move(y), metric);
      CHECK(a.loss == Approx(b.loss).epsilon(1e-9));
      CHECK(a.winner == b.winner);
    }
  }
}

TEST_CASE("flat-buffer forms agree with wta_evaluate and wta_gradients") {
  std::mt19937_64 eng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto hyps = random_set(eng, 7, 3);
    auto y = random_point(eng, 3);
    for (double eps : {0.0, 0.05}) {
      const auto metric = WtaMetric::log_distance(0.02);
      auto ref = wta_evaluate(hyps, y, metric, eps);
      auto grads = wta_gradients(hyps, y, metric, eps);
      std::vector<double> g1(21, 0.0), g2(21, 0.0);
      auto acc = wta_accumulate(hyps.flat(), 3, y, metric, eps, g1, 0.5);
      auto step = wta_step(hyps.flat(), 3, y, metric, eps, g2, 0.5);
      CHECK(acc.winner == ref.winner);
      CHECK(step.winner == ref.winner);
      CHECK(step.loss == ref.loss);
      CHECK(step.relaxed_loss == Approx(ref.relaxed_loss));
      CHECK(g1 == g2);
      for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(g1[i * 3 + j] == Approx(0.5 * grads[i][j]));
    }
  }
}

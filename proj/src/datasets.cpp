#include "dpmhp/datasets.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <string>

namespace dpmhp {

void Dataset::validate() const {
  if (label_dim == 0) throw DataError("dataset label dimension must be >= 1");
  if (labels.size() % label_dim != 0) throw DataError("label buffer has bad shape");
  if (features.size() != size() * feature_dim)
    throw DataError("feature buffer does not match label count");
  for (double v : labels)
    if (!std::isfinite(v)) throw DataError("non-finite label in dataset");
  for (double v : features)
    if (!std::isfinite(v)) throw DataError("non-finite feature in dataset");
}

double CallCenterModel::rate(double x) const {
  return lambda0 * (1.0 + alpha * std::sin(std::numbers::pi * (x - x_min) / (x_max - x_min)));
}

void CallCenterModel::validate() const {
  if (!(lambda0 > 0.0)) throw DataError("call-center lambda0 must be > 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DataError("call-center alpha must lie in [0, 1)");
  if (!(x_max > x_min)) throw DataError("call-center x range is empty");
  if (shape < 1) throw DataError("Erlang shape must be >= 1");
}

void MixtureModel::validate() const {
  if (components.empty()) throw DataError("mixture has no components");
  const auto n = components.front().mean.size();
  if (n < 1) throw DataError("mixture dimension must be >= 1");
  double total = 0.0;
  for (const auto& c : components) {
    if (c.mean.size() != n || c.covariance.rows() != n || c.covariance.cols() != n)
      throw DataError("mixture components have inconsistent dimensions");
    if (!(c.weight >= 0.0)) throw DataError("mixture weights must be nonnegative");
    if (!c.covariance.isApprox(c.covariance.transpose(), 1e-12))
      throw DataError("mixture covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) throw DataError("mixture covariance is not positive definite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("mixture weights must sum to 1");
}

double MixtureModel::density(std::span<const double> y) const {
  const Eigen::Map<const Eigen::VectorXd> v(y.data(), static_cast<Eigen::Index>(y.size()));
  double p = 0.0;
  for (const auto& c : components) {
    if (c.weight == 0.0) continue;
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    const Eigen::VectorXd z = llt.matrixL().solve(v - c.mean);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double n = static_cast<double>(y.size());
    p += c.weight * std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi));
  }
  return p;
}

MixtureModel fig1_mixture() {
  MixtureModel m;
  auto add = [&](double w, Eigen::Vector2d mean, Eigen::Matrix2d cov) {
    m.components.push_back({w, mean, cov});
  };
  add(0.5, {0.0, 0.0}, (Eigen::Matrix2d() << 1.0, 0.3, 0.3, 0.5).finished());
  add(0.3, {2.5, 1.5}, (Eigen::Matrix2d() << 0.3, -0.1, -0.1, 0.6).finished());
  add(0.2, {-2.0, 2.0}, (Eigen::Matrix2d() << 0.4, 0.0, 0.0, 0.15).finished());
  return m;
}

MixtureModel standard_normal(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  MixtureModel m;
  m.components.push_back({1.0, Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)});
  return m;
}

double erlang_pdf(double y, double lambda, int k) {
  if (!(lambda > 0.0) || k < 1) throw DataError("erlang_pdf needs lambda > 0 and k >= 1");
  if (y < 0.0) return 0.0;
  if (y == 0.0) return k == 1 ? lambda : 0.0;
  const double log_p = k * std::log(lambda) + (k - 1) * std::log(y) - lambda * y - std::lgamma(k);
  return std::exp(log_p);
}

double erlang_cdf(double y, double lambda, int k) {
  if (!(lambda > 0.0) || k < 1) throw DataError("erlang_cdf needs lambda > 0 and k >= 1");
  if (y <= 0.0) return 0.0;
  // 1 - P(Poisson(lambda y) < k)
  const double t = lambda * y;
  double term = 1.0;
  double sum = 1.0;
  for (int i = 1; i < k; ++i) {
    term *= t / i;
    sum += term;
  }
  return 1.0 - std::exp(-t) * sum;
}

namespace {

double erlang_draw(Engine& eng, double rate, int shape) {
  double y = 0.0;
  for (int j = 0; j < shape; ++j) y += -std::log(uniform_open_zero(eng)) / rate;
  return y;
}

} // namespace

Dataset sample_call_center(const CallCenterModel& model, std::size_t count, std::uint64_t seed) {
  model.validate();
  if (count < 1) throw DataError("sample count must be >= 1");
  Engine eng = make_stream(seed, "sample/call-center");
  Dataset d;
  d.feature_dim = 1;
  d.label_dim = 1;
  d.features.reserve(count);
  d.labels.reserve(count);
  const double width = model.x_max - model.x_min;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = model.x_min + width * std::generate_canonical<double, 53>(eng);
    d.features.push_back(x);
    d.labels.push_back(erlang_draw(eng, model.rate(x), model.shape));
  }
  return d;
}

std::vector<double> sample_call_center_at(const CallCenterModel& model, double x, std::size_t count,
                                          std::uint64_t seed) {
  model.validate();
  Engine eng = make_stream(seed, "sample/call-center-at");
  std::vector<double> out(count);
  const double rate = model.rate(x);
  for (auto& y : out) y = erlang_draw(eng, rate, model.shape);
  return out;
}

namespace {

struct PreparedMixture {
  std::vector<double> cumulative;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> factors;
};

PreparedMixture prepare(const MixtureModel& model) {
  model.validate();
  PreparedMixture p;
  double acc = 0.0;
  for (const auto& c : model.components) {
    acc += c.weight;
    p.cumulative.push_back(acc);
    p.means.push_back(c.mean);
    p.factors.push_back(Eigen::LLT<Eigen::MatrixXd>(c.covariance).matrixL().toDenseMatrix());
  }
  return p;
}

void draw_mixture(const PreparedMixture& p, Engine& eng, std::normal_distribution<double>& normal,
                  double* out) {
  const double u = std::generate_canonical<double, 53>(eng) * p.cumulative.back();
  std::size_t c = 0;
  while (c + 1 < p.cumulative.size() && !(u < p.cumulative[c])) ++c;
  const auto n = p.means[c].size();
  Eigen::VectorXd z(n);
  for (Eigen::Index j = 0; j < n; ++j) z[j] = normal(eng);
  const Eigen::VectorXd v = p.means[c] + p.factors[c] * z;
  for (Eigen::Index j = 0; j < n; ++j) out[j] = v[j];
}

} // namespace

std::vector<double> sample_mixture(const MixtureModel& model, std::size_t count, std::uint64_t seed) {
  const PreparedMixture p = prepare(model);
  const std::size_t n = model.dim();
  Engine eng = make_stream(seed, "sample/mixture");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(count * n);
  for (std::size_t i = 0; i < count; ++i) draw_mixture(p, eng, normal, out.data() + i * n);
  return out;
}

SurrogateComponents surrogate_components(std::span<const double> x) {
  if (x.size() != 4) throw DataError("surrogate features are 4-dimensional");
  SurrogateComponents s;
  const Eigen::Vector2d center(0.5 * x[2], 0.3 * x[3]);
  const double separation = 2.0 + x[0];
  const double angle = 0.25 * std::numbers::pi * x[1];
  const Eigen::Vector2d axis(std::cos(angle), std::sin(angle));
  s.weight[0] = 0.5 + 0.3 * x[3];
  s.weight[1] = 1.0 - s.weight[0];
  s.mean[0] = center + 0.5 * separation * axis;
  s.mean[1] = center - 0.5 * separation * axis;
  s.sigma[0] = Eigen::Vector2d(0.3 + 0.1 * x[2], 0.2 + 0.05 * x[3]);
  s.sigma[1] = Eigen::Vector2d(0.2 + 0.05 * x[1], 0.3 + 0.1 * x[0]);
  return s;
}

MixtureModel surrogate_mixture(std::span<const double> x) {
  const SurrogateComponents s = surrogate_components(x);
  MixtureModel m;
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    cov(0, 0) = s.sigma[c][0] * s.sigma[c][0];
    cov(1, 1) = s.sigma[c][1] * s.sigma[c][1];
    m.components.push_back({s.weight[c], Eigen::VectorXd(s.mean[c]), cov});
  }
  return m;
}

Dataset sample_conditional_surrogate(std::size_t count, std::uint64_t seed) {
  if (count < 1) throw DataError("sample count must be >= 1");
  Engine eng = make_stream(seed, "sample/conditional-surrogate");
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.feature_dim = 4;
  d.label_dim = 2;
  d.features.resize(count * 4);
  d.labels.resize(count * 2);
  for (std::size_t i = 0; i < count; ++i) {
    double* x = d.features.data() + i * 4;
    for (int j = 0; j < 4; ++j) x[j] = 2.0 * std::generate_canonical<double, 53>(eng) - 1.0;
    const SurrogateComponents s = surrogate_components({x, 4});
    const int c = std::generate_canonical<double, 53>(eng) < s.weight[0] ? 0 : 1;
    double* y = d.labels.data() + i * 2;
    for (int j = 0; j < 2; ++j) y[j] = s.mean[c][j] + s.sigma[c][j] * normal(eng);
  }
  return d;
}

} // namespace dpmhp

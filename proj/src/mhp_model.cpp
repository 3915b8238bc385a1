#include "dpmhp/mhp_model.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dpmhp {

using nlohmann::json;

double EpsilonSchedule::at(std::size_t epoch, std::size_t epochs) const {
  if (initial <= 0.0 || anneal_fraction <= 0.0 || epochs == 0) return 0.0;
  const double horizon = anneal_fraction * static_cast<double>(epochs);
  const double progress = static_cast<double>(epoch) / horizon;
  return progress >= 1.0 ? 0.0 : initial * (1.0 - progress);
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  if (lr_decay_every == 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be > 0");
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (!(epsilon.initial >= 0.0 && epsilon.initial < 1.0)) throw DataError("epsilon must lie in [0, 1)");
  if (!(lr_decay > 0.0)) throw DataError("learning-rate decay factor must be > 0");
}

Standardizer Standardizer::fit(std::span<const double> rows, std::size_t dim) {
  Standardizer s;
  s.mean.assign(dim, 0.0);
  s.scale.assign(dim, 1.0);
  if (dim == 0 || rows.empty()) return s;
  const std::size_t count = rows.size() / dim;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += rows[i * dim + j];
  for (auto& m : s.mean) m /= static_cast<double>(count);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - s.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(count));
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
}

LabelFrame LabelFrame::fit(std::span<const double> rows, std::size_t dim) {
  LabelFrame f;
  f.center.assign(dim, 0.0);
  if (dim == 0 || rows.empty()) return f;
  const std::size_t count = rows.size() / dim;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < dim; ++j) f.center[j] += rows[i * dim + j];
  for (auto& c : f.center) c /= static_cast<double>(count);
  // Root-mean-square distance from the center.
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - f.center[j];
      total += d * d;
    }
  const double rms = std::sqrt(total / static_cast<double>(count));
  f.scale = rms > 0.0 ? rms : 1.0;
  return f;
}

HypothesisSet MhpModel::predict(std::span<const double> x, NetworkWorkspace& ws) const {
  std::vector<double> xs(x.size());
  if (x.size() != spec.input_dim)
    throw DataError("feature dimension mismatch: expected " + std::to_string(spec.input_dim) + ", got " +
                    std::to_string(x.size()));
  input.apply(x, xs);
  const auto out = forward(params, xs, ws);
  std::vector<double> flat(out.begin(), out.end());
  const std::size_t n = spec.label_dim;
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = labels.center[i % n] + labels.scale * flat[i];
  return HypothesisSet(std::move(flat), n);
}

HypothesisSet MhpModel::predict(std::span<const double> x) const {
  NetworkWorkspace ws;
  return predict(x, ws);
}

namespace {

// Loss in the internal frame -> loss in label units.
double to_label_units(const WtaMetric& metric, double scale, double internal_loss) {
  if (metric.kind == MetricKind::SquaredEuclidean) return scale * scale * internal_loss;
  return internal_loss + std::log(scale);
}

// Output biases at distinct training labels (partial Fisher-Yates), cycled
// when there are fewer samples than hypotheses.
void seed_output_bias(NetworkParams& params, std::span<const double> ys, std::size_t count, std::uint64_t seed) {
  const NetworkSpec& spec = params.spec();
  const std::size_t n = spec.label_dim;
  const std::size_t picks = std::min(count, spec.n_hypotheses);
  auto bias = params.bias(spec.layer_count() - 1);
  Engine eng = make_stream(seed, "train/output-bias");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < picks; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(eng)]);
  }
  for (std::size_t j = 0; j < spec.n_hypotheses; ++j)
    std::copy_n(ys.data() + idx[j % picks] * n, n, bias.data() + j * n);
}

} // namespace

namespace {

void check_training_data(const NetworkSpec& spec, const Dataset& data) {
  data.validate();
  if (data.size() == 0) throw DataError("training data is empty");
  if (data.feature_dim != spec.input_dim)
    throw DataError("feature dimension mismatch: network expects " + std::to_string(spec.input_dim) +
                    ", data has " + std::to_string(data.feature_dim));
  if (data.label_dim != spec.label_dim)
    throw DataError("label dimension mismatch: network expects " + std::to_string(spec.label_dim) +
                    ", data has " + std::to_string(data.label_dim));
}

TrainResult run_training(MhpModel model, const Dataset& data, const TrainConfig& cfg, bool fresh) {
  const NetworkSpec& spec = model.spec;
  const std::size_t count = data.size();
  const std::size_t m = spec.input_dim;
  const std::size_t n = spec.label_dim;
  std::vector<double> xs(count * m);
  std::vector<double> ys(count * n);
  for (std::size_t i = 0; i < count; ++i) {
    model.input.apply(data.feature(i), {xs.data() + i * m, m});
    for (std::size_t j = 0; j < n; ++j)
      ys[i * n + j] = (data.labels[i * n + j] - model.labels.center[j]) / model.labels.scale;
  }
  const WtaMetric internal = model.metric.rescaled(1.0 / model.labels.scale);
  if (fresh && cfg.bias_from_labels) seed_output_bias(model.params, ys, count, cfg.seed);

  TrainResult result;
  Optimizer opt(cfg.optimizer, model.params.data().size());
  std::vector<double> grad(model.params.data().size());
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine shuffle = make_stream(cfg.seed, "train/shuffle");
  NetworkWorkspace ws;
  std::vector<char> won(spec.n_hypotheses);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double eps = cfg.epsilon.at(epoch, cfg.epochs);
    const double lr = cfg.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle);
    std::fill(won.begin(), won.end(), 0);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < count; start += cfg.batch_size) {
      const std::size_t stop = std::min(count, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        WtaStep r;
        try {
          r = backward(model.params, {xs.data() + i * m, m}, {ys.data() + i * n, n}, internal, eps, grad,
                       scale, ws);
        } catch (const NumericalError& e) {
          throw NumericalError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
        }
        loss_sum += r.loss;
        won[r.winner] = 1;
      }
      opt.step(model.params.data(), grad, lr);
    }
    const double mean_loss = to_label_units(model.metric, model.labels.scale, loss_sum / static_cast<double>(count));
    if (!std::isfinite(mean_loss))
      throw NumericalError("training diverged in epoch " + std::to_string(epoch) + ": loss is not finite");
    result.history.epoch_loss.push_back(mean_loss);
    result.history.alive_hypotheses.push_back(static_cast<std::size_t>(std::count(won.begin(), won.end(), 1)));
    result.history.epsilon.push_back(eps);
    result.history.learning_rate.push_back(lr);
  }
  result.model = std::move(model);
  return result;
}

WtaMetric resolve_metric(WtaMetric metric, const Dataset& data) {
  if (metric.kind == MetricKind::LogDistance && !(metric.delta > 0.0))
    metric.delta = default_delta(data.labels, data.label_dim);
  metric.validate();
  return metric;
}

} // namespace

TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  check_training_data(spec, data);
  MhpModel model;
  model.spec = spec;
  model.metric = resolve_metric(cfg.metric, data);
  model.input = Standardizer::fit(data.features, data.feature_dim);
  model.labels = LabelFrame::fit(data.labels, data.label_dim);
  model.params = init_network(spec, cfg.seed);
  return run_training(std::move(model), data, cfg, true);
}

TrainResult train_from(const MhpModel& init, const Dataset& data, const TrainConfig& cfg) {
  init.spec.validate();
  cfg.validate();
  check_training_data(init.spec, data);
  MhpModel model = init;
  model.metric = resolve_metric(cfg.metric, data);
  return run_training(std::move(model), data, cfg, false);
}

double mean_wta_loss(const MhpModel& model, const Dataset& data) {
  NetworkWorkspace ws;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const HypothesisSet h = model.predict(data.feature(i), ws);
    total += wta_evaluate(h, data.label(i), model.metric).loss;
  }
  return total / static_cast<double>(data.size());
}

// ---- persistence ----

std::string MhpModel::to_json_text() const {
  json j;
  j["format"] = "dpmhp-model";
  j["schema_version"] = 1;
  j["spec"] = {{"input_dim", spec.input_dim},
               {"hidden_layers", spec.hidden_layers},
               {"activation", to_string(spec.activation)},
               {"n_hypotheses", spec.n_hypotheses},
               {"label_dim", spec.label_dim}};
  j["input_standardization"] = {{"mean", input.mean}, {"scale", input.scale}};
  j["label_frame"] = {{"center", labels.center}, {"scale", labels.scale}};
  j["metric"] = {{"kind", to_string(metric.kind)}, {"delta", metric.delta}};
  j["weight_layout"] = "input-major";
  json layers = json::array();
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    layers.push_back({{"inputs", spec.layer_input(l)},
                      {"outputs", spec.layer_output(l)},
                      {"weights", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  j["layers"] = std::move(layers);
  return j.dump(1);
}

MhpModel MhpModel::from_json_text(const std::string& text) {
  MhpModel m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "dpmhp-model") throw DataError("not a dpmhp model file");
    if (j.at("schema_version").get<int>() != 1) throw DataError("unsupported model schema version");
    const json& s = j.at("spec");
    m.spec.input_dim = s.at("input_dim");
    m.spec.hidden_layers = s.at("hidden_layers").get<std::vector<std::size_t>>();
    m.spec.activation = activation_from_string(s.at("activation").get<std::string>());
    m.spec.n_hypotheses = s.at("n_hypotheses");
    m.spec.label_dim = s.at("label_dim");
    m.input.mean = j.at("input_standardization").at("mean").get<std::vector<double>>();
    m.input.scale = j.at("input_standardization").at("scale").get<std::vector<double>>();
    m.labels.center = j.at("label_frame").at("center").get<std::vector<double>>();
    m.labels.scale = j.at("label_frame").at("scale");
    m.metric.kind = metric_kind_from_string(j.at("metric").at("kind").get<std::string>());
    m.metric.delta = j.at("metric").at("delta");
    m.params = NetworkParams(m.spec);
    const json& layers = j.at("layers");
    if (layers.size() != m.spec.layer_count()) throw DataError("model file layer count mismatch");
    for (std::size_t l = 0; l < m.spec.layer_count(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      auto pw = m.params.weights(l);
      auto pb = m.params.bias(l);
      if (w.size() != pw.size() || b.size() != pb.size()) throw DataError("model file layer shape mismatch");
      std::copy(w.begin(), w.end(), pw.begin());
      std::copy(b.begin(), b.end(), pb.begin());
    }
    if (m.input.mean.size() != m.spec.input_dim || m.input.scale.size() != m.spec.input_dim ||
        m.labels.center.size() != m.spec.label_dim)
      throw DataError("model file standardization shape mismatch");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return m;
}

void MhpModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << to_json_text() << '\n';
}

MhpModel MhpModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

} // namespace dpmhp

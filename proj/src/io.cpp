#include "dpmhp/io.hpp"

#include "dpmhp/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dpmhp::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path, lineno));
    t.rows.push_back(std::move(row));
  }
  return t;
}

} // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  auto out = open_out(path);
  std::string line;
  for (std::size_t j = 0; j < data.feature_dim; ++j) line += "x" + std::to_string(j) + ",";
  for (std::size_t j = 0; j < data.label_dim; ++j) line += "y" + std::to_string(j) + (j + 1 < data.label_dim ? "," : "");
  out << line << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    line.clear();
    for (double v : data.feature(i)) line += format_double(v) + ",";
    const auto y = data.label(i);
    for (std::size_t j = 0; j < y.size(); ++j) line += format_double(y[j]) + (j + 1 < y.size() ? "," : "");
    out << line << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  Dataset d;
  d.feature_dim = 0;
  d.label_dim = 0;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string expect_x = "x" + std::to_string(d.feature_dim);
    const std::string expect_y = "y" + std::to_string(d.label_dim);
    if (d.label_dim == 0 && t.header[c] == expect_x) {
      ++d.feature_dim;
    } else if (t.header[c] == expect_y) {
      ++d.label_dim;
    } else {
      throw DataError(path.string() + ": unexpected column '" + t.header[c] + "' (header must be x0..,y0..)");
    }
  }
  if (d.label_dim == 0) throw DataError(path.string() + ": no label columns");
  for (const auto& row : t.rows) {
    d.features.insert(d.features.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d.feature_dim));
    d.labels.insert(d.labels.end(), row.begin() + static_cast<std::ptrdiff_t>(d.feature_dim), row.end());
  }
  d.validate();
  return d;
}

void write_hypotheses_csv(const std::filesystem::path& path, const HypothesisSet& hyps) {
  auto out = open_out(path);
  for (std::size_t j = 0; j < hyps.dim(); ++j) out << "h" << j << (j + 1 < hyps.dim() ? "," : "\n");
  for (std::size_t i = 0; i < hyps.size(); ++i)
    for (std::size_t j = 0; j < hyps.dim(); ++j) out << format_double(hyps[i][j]) << (j + 1 < hyps.dim() ? "," : "\n");
}

HypothesisSet read_hypotheses_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (t.header[j] != "h" + std::to_string(j)) throw DataError(path.string() + ": header must be h0..h{n-1}");
  if (t.header.empty() || t.rows.empty()) throw DataError(path.string() + ": no hypotheses");
  std::vector<double> flat;
  for (const auto& row : t.rows) flat.insert(flat.end(), row.begin(), row.end());
  return HypothesisSet(std::move(flat), t.header.size());
}

void write_shares_csv(const std::filesystem::path& path, const ShareReport& report) {
  auto out = open_out(path);
  out << "hypothesis,count,share\n";
  for (std::size_t i = 0; i < report.shares.size(); ++i)
    out << i << ',' << report.counts[i] << ',' << format_double(report.shares[i]) << '\n';
}

void write_moment_curve_csv(const std::filesystem::path& path, const std::vector<MomentRow>& rows) {
  auto out = open_out(path);
  out << "x,hyp_mean,true_mean,hyp_var,true_var\n";
  for (const auto& r : rows)
    out << format_double(r.x) << ',' << format_double(r.hyp_mean) << ',' << format_double(r.true_mean) << ','
        << format_double(r.hyp_var) << ',' << format_double(r.true_var) << '\n';
}

void write_history_csv(const std::filesystem::path& path, const TrainingHistory& h) {
  auto out = open_out(path);
  out << "epoch,loss,alive_hypotheses,epsilon,learning_rate\n";
  for (std::size_t e = 0; e < h.epoch_loss.size(); ++e)
    out << e << ',' << format_double(h.epoch_loss[e]) << ',' << h.alive_hypotheses[e] << ','
        << format_double(h.epsilon[e]) << ',' << format_double(h.learning_rate[e]) << '\n';
}

json to_json(const ShareReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "share_report"},
          {"n_hypotheses", r.shares.size()},
          {"sample_count", r.sample_count},
          {"max_share", r.max_share},
          {"min_share", r.min_share},
          {"chi_square_vs_uniform", r.chi_square_vs_uniform},
          {"fraction_within_half_to_double", r.fraction_within(0.5, 2.0)},
          {"counts", r.counts},
          {"shares", r.shares}};
}

json to_json(const NllReport& r) {
  json j = {{"schema_version", kSchemaVersion},
            {"kind", "nll_report"},
            {"estimator", to_string(r.estimator)},
            {"nll_per_sample", r.nll_per_sample},
            {"test_count", r.test_count}};
  if (r.estimator == EstimatorKind::Kde) j["bandwidth"] = r.bandwidth;
  return j;
}

json to_json(const MomentErrors& e) {
  return {{"mean_rel_error", e.mean_rel_error}, {"var_rel_error", e.var_rel_error}};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

json to_json(const WtaMetric& m) { return {{"kind", to_string(m.kind)}, {"delta", m.delta}}; }

json to_json(const TrainConfig& c) {
  return {{"metric", to_json(c.metric)},
          {"epsilon", c.epsilon.initial},
          {"epsilon_anneal_fraction", c.epsilon.anneal_fraction},
          {"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"lr_decay_every", c.lr_decay_every},
          {"optimizer", to_string(c.optimizer.kind)},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"adam_eps", c.optimizer.eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"bias_from_labels", c.bias_from_labels}};
}

json to_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim},
          {"hidden_layers", s.hidden_layers},
          {"activation", to_string(s.activation)},
          {"n_hypotheses", s.n_hypotheses},
          {"label_dim", s.label_dim}};
}

json to_json(const CallCenterModel& m) {
  return {{"lambda0", m.lambda0}, {"alpha", m.alpha}, {"x_min", m.x_min}, {"x_max", m.x_max}, {"shape", m.shape}};
}

namespace {

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

} // namespace

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  check_keys(j, {"metric", "epsilon", "epsilon_anneal_fraction", "learning_rate", "lr_decay", "lr_decay_every",
                 "optimizer", "beta1", "beta2", "adam_eps", "batch_size", "epochs", "seed", "bias_from_labels"},
             "training config");
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    if (m.is_string()) {
      c.metric.kind = metric_kind_from_string(m.get<std::string>());
    } else {
      check_keys(m, {"kind", "delta"}, "metric");
      std::string kind(to_string(c.metric.kind));
      read_if(m, "kind", kind);
      c.metric.kind = metric_kind_from_string(kind);
      read_if(m, "delta", c.metric.delta);
    }
  }
  read_if(j, "epsilon", c.epsilon.initial);
  read_if(j, "epsilon_anneal_fraction", c.epsilon.anneal_fraction);
  read_if(j, "learning_rate", c.learning_rate);
  read_if(j, "lr_decay", c.lr_decay);
  read_if(j, "lr_decay_every", c.lr_decay_every);
  std::string opt(to_string(c.optimizer.kind));
  read_if(j, "optimizer", opt);
  c.optimizer.kind = optimizer_kind_from_string(opt);
  read_if(j, "beta1", c.optimizer.beta1);
  read_if(j, "beta2", c.optimizer.beta2);
  read_if(j, "adam_eps", c.optimizer.eps);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "epochs", c.epochs);
  read_if(j, "seed", c.seed);
  read_if(j, "bias_from_labels", c.bias_from_labels);
  return c;
}

NetworkSpec network_spec_from_json(const json& j, NetworkSpec s) {
  check_keys(j, {"input_dim", "hidden_layers", "activation", "n_hypotheses", "label_dim"}, "network spec");
  read_if(j, "input_dim", s.input_dim);
  read_if(j, "hidden_layers", s.hidden_layers);
  std::string act(to_string(s.activation));
  read_if(j, "activation", act);
  s.activation = activation_from_string(act);
  read_if(j, "n_hypotheses", s.n_hypotheses);
  read_if(j, "label_dim", s.label_dim);
  return s;
}

CallCenterModel call_center_from_json(const json& j, CallCenterModel m) {
  check_keys(j, {"lambda0", "alpha", "x_min", "x_max", "shape"}, "call-center model");
  read_if(j, "lambda0", m.lambda0);
  read_if(j, "alpha", m.alpha);
  read_if(j, "x_min", m.x_min);
  read_if(j, "x_max", m.x_max);
  read_if(j, "shape", m.shape);
  return m;
}

void write_json(const std::filesystem::path& path, const json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

} // namespace dpmhp::io

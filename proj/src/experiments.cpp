#include "dpmhp/experiments.hpp"

#include "dpmhp/error.hpp"
#include "dpmhp/io.hpp"
#include "dpmhp/quantizer.hpp"
#include "dpmhp/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

namespace dpmhp::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

Preset preset_from_string(const std::string& name) {
  if (name == "full") return Preset::Full;
  if (name == "quick") return Preset::Quick;
  throw UsageError("unknown preset '" + name + "' (expected full or quick)");
}

std::string to_string(Preset p) { return p == Preset::Full ? "full" : "quick"; }

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"fig1", "density", "callcenter", "table1-surrogate"};
  return names;
}

namespace {

// Seed for one consumer of an experiment run.
std::uint64_t derive(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
  return splitmix64(seed ^ splitmix64(hash_purpose(purpose) + index));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

WtaMetric ldp_for(std::span<const double> samples, std::size_t dim) {
  return WtaMetric::log_distance(default_delta(samples, dim));
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string x_tag(double x) { return "x" + io::format_double(x); }

} // namespace

// ---------------------------------------------------------------------------

SharesConfig SharesConfig::preset(Preset p) {
  SharesConfig c;
  c.quantizer = quantizer_defaults();
  if (p == Preset::Quick) {
    c.n_hypotheses = 30;
    c.train_samples = 3000;
    c.assignment_samples = 10000;
    c.seeds = 2;
    c.quantizer.epochs = 10;
    c.quantizer.lr_decay_every = 4;
  }
  return c;
}

SharesResult run_shares(const SharesConfig& cfg, std::uint64_t seed, unsigned threads) {
  if (cfg.seeds == 0) throw DataError("fig1: seeds must be >= 1");
  const MixtureModel mix = fig1_mixture();
  const std::size_t dim = mix.dim();
  SharesResult out;
  std::vector<double> within, ratio;
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    const auto train = sample_mixture(mix, cfg.train_samples, derive(seed, "fig1/train", i));
    const auto assign = sample_mixture(mix, cfg.assignment_samples, derive(seed, "fig1/assign", i));
    TrainConfig q = cfg.quantizer;
    q.seed = derive(seed, "fig1/fit", i);
    auto h_l2 = fit_hypotheses(train, dim, cfg.n_hypotheses, WtaMetric::squared_euclidean(), q);
    auto h_ldp = fit_hypotheses(train, dim, cfg.n_hypotheses, ldp_for(train, dim), q);
    auto s_l2 = voronoi_shares(h_l2, assign, threads);
    auto s_ldp = voronoi_shares(h_ldp, assign, threads);

    SharesSeed row;
    row.seed = i;
    row.within_l2 = s_l2.fraction_within(cfg.band_lo, cfg.band_hi);
    row.within_ldp = s_ldp.fraction_within(cfg.band_lo, cfg.band_hi);
    row.chi_l2 = s_l2.chi_square_vs_uniform;
    row.chi_ldp = s_ldp.chi_square_vs_uniform;
    out.seeds.push_back(row);
    within.push_back(row.within_ldp);
    ratio.push_back(row.chi_l2 > 0.0 ? row.chi_ldp / row.chi_l2 : INFINITY);
    if (i == 0) {
      out.hyps_l2 = std::move(h_l2);
      out.hyps_ldp = std::move(h_ldp);
      out.shares_l2 = std::move(s_l2);
      out.shares_ldp = std::move(s_ldp);
    }
  }
  out.median_within_ldp = median(within);
  out.median_chi_ratio = median(ratio);
  out.pass = out.median_within_ldp >= cfg.min_within && out.median_chi_ratio < cfg.max_chi_ratio;
  return out;
}

// ---------------------------------------------------------------------------

DensityConfig DensityConfig::preset(Preset p) {
  DensityConfig c;
  c.quantizer = quantizer_defaults();
  c.quantizer.epochs = 400;
  c.quantizer.lr_decay_every = 80;
  c.quantizer.learning_rate = 2e-2;
  c.quantizer.batch_size = 512;
  if (p == Preset::Quick) {
    c.n_hypotheses = 20;
    c.train_samples = 5000;
    c.quantizer.epochs = 20;
    c.quantizer.lr_decay_every = 5;
    c.grid_points = 1601;
  }
  return c;
}

DensityResult run_density(const DensityConfig& cfg, std::uint64_t seed) {
  if (cfg.grid_points < 2 || !(cfg.grid_lo < cfg.grid_hi)) throw DataError("density: bad grid");
  const auto train = sample_mixture(standard_normal(1), cfg.train_samples, derive(seed, "density/train"));
  TrainConfig q = cfg.quantizer;
  q.seed = derive(seed, "density/fit");

  std::vector<double> grid(cfg.grid_points), p(cfg.grid_points);
  for (std::size_t i = 0; i < cfg.grid_points; ++i) {
    grid[i] = cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * static_cast<double>(i) / (cfg.grid_points - 1);
    p[i] = std::exp(-0.5 * grid[i] * grid[i]);
  }

  DensityResult r;
  r.hyps_l2 = fit_hypotheses(train, 1, cfg.n_hypotheses, WtaMetric::squared_euclidean(), q);
  r.hyps_ldp = fit_hypotheses(train, 1, cfg.n_hypotheses, ldp_for(train, 1), q);
  r.ks_l2_p = density_exponent_ks(r.hyps_l2, grid, p, 1.0);
  r.ks_l2_cube = density_exponent_ks(r.hyps_l2, grid, p, 1.0 / 3.0);
  r.ks_ldp_p = density_exponent_ks(r.hyps_ldp, grid, p, 1.0);
  r.ks_ldp_cube = density_exponent_ks(r.hyps_ldp, grid, p, 1.0 / 3.0);
  r.pass = r.ks_l2_cube < r.ks_l2_p && r.ks_ldp_p < r.ks_ldp_cube && r.ks_ldp_p < cfg.max_ks_ldp;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Shared by both conditional experiments. Pure WTA from zero output biases:
// a relaxation term would pull the l2 set's mean onto E[y|x] on its own.
TrainConfig conditional_training() {
  TrainConfig t;
  t.epochs = 40;
  t.learning_rate = 1e-3;
  t.batch_size = 128;
  t.epsilon.initial = 0.0;
  t.bias_from_labels = false;
  t.lr_decay = 0.5;
  t.lr_decay_every = 10;
  return t;
}

} // namespace

CallCenterConfig CallCenterConfig::preset(Preset p) {
  CallCenterConfig c;
  c.network.input_dim = 1;
  c.network.label_dim = 1;
  c.network.n_hypotheses = 50;
  c.training = conditional_training();
  for (int i = 0; i <= 28; ++i) c.x_grid.push_back(6.0 + 0.5 * i);
  if (p == Preset::Quick) {
    c.train_samples = 3000;
    c.network.n_hypotheses = 10;
    c.network.hidden_layers = {16};
    c.training.epochs = 3;
    c.training.lr_decay_every = 0;
    c.share_samples = 2000;
    c.x_grid = {6.0, 9.5, 13.0, 16.5, 20.0};
  }
  return c;
}

CallCenterResult run_call_center(const CallCenterConfig& cfg, std::uint64_t seed, unsigned threads) {
  const Dataset data = sample_call_center(cfg.model, cfg.train_samples, derive(seed, "callcenter/train"));
  auto run = [&](WtaMetric metric) {
    TrainConfig t = cfg.training;
    t.metric = metric;
    t.seed = derive(seed, "callcenter/fit");
    auto trained = train(cfg.network, data, t);
    CallCenterRun r;
    r.rows = conditional_moment_curve(trained.model, cfg.x_grid, cfg.model);
    r.errors = moment_curve_errors(r.rows);
    for (std::size_t k = 0; k < cfg.share_x.size(); ++k) {
      const double x = cfg.share_x[k];
      const auto ys = sample_call_center_at(cfg.model, x, cfg.share_samples, derive(seed, "callcenter/shares", k));
      const std::vector<double> xv{x};
      r.shares.push_back(voronoi_shares(trained.model.predict(xv), ys, threads));
    }
    r.model = std::move(trained.model);
    r.history = std::move(trained.history);
    return r;
  };
  CallCenterResult out;
  out.l2 = run(WtaMetric::squared_euclidean());
  out.ldp = run(WtaMetric{MetricKind::LogDistance, cfg.training.metric.kind == MetricKind::LogDistance
                                                        ? cfg.training.metric.delta
                                                        : 0.0});
  out.mean_order = out.ldp.errors.mean_rel_error < out.l2.errors.mean_rel_error;
  out.mean_bound = out.ldp.errors.mean_rel_error < cfg.max_mean_error_ldp;
  out.var_order = out.ldp.errors.var_rel_error < out.l2.errors.var_rel_error;
  out.pass = out.mean_order && out.mean_bound && out.var_order;
  return out;
}

// ---------------------------------------------------------------------------

Table1Config Table1Config::preset(Preset p) {
  Table1Config c;
  c.network.input_dim = 4;
  c.network.label_dim = 2;
  c.network.n_hypotheses = 100;
  c.training = conditional_training();
  if (p == Preset::Quick) {
    c.train_samples = 2000;
    c.test_samples = 300;
    c.network.n_hypotheses = 10;
    c.network.hidden_layers = {16};
    c.training.epochs = 2;
    c.training.lr_decay_every = 0;
  }
  return c;
}

Table1Outcome run_table1(const Table1Config& cfg, std::uint64_t seed, unsigned threads) {
  const Dataset train_data = sample_conditional_surrogate(cfg.train_samples, derive(seed, "table1/train"));
  const Dataset test = sample_conditional_surrogate(cfg.test_samples, derive(seed, "table1/test"));
  TrainConfig a = cfg.training, b = cfg.training;
  a.metric = WtaMetric::squared_euclidean();
  b.metric = {MetricKind::LogDistance, cfg.training.metric.kind == MetricKind::LogDistance ? cfg.training.metric.delta : 0.0};
  a.seed = b.seed = derive(seed, "table1/fit");
  auto r_l2 = train(cfg.network, train_data, a);
  auto r_ldp = train(cfg.network, train_data, b);
  Table1Outcome out;
  out.nll.l2 = conditional_nll(r_l2.model, test, threads);
  out.nll.ldp = conditional_nll(r_ldp.model, test, threads);
  out.history_l2 = std::move(r_l2.history);
  out.history_ldp = std::move(r_ldp.history);
  out.pass = out.nll.ldp.norm.nll_per_sample < out.nll.l2.norm.nll_per_sample &&
             out.nll.ldp.kde.nll_per_sample < out.nll.l2.kde.nll_per_sample;
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const SharesConfig& c) {
  return {{"n_hypotheses", c.n_hypotheses},     {"train_samples", c.train_samples},
          {"assignment_samples", c.assignment_samples}, {"seeds", c.seeds},
          {"quantizer", io::to_json(c.quantizer)}, {"band_lo", c.band_lo},
          {"band_hi", c.band_hi},               {"min_within", c.min_within},
          {"max_chi_ratio", c.max_chi_ratio}};
}

json to_json(const DensityConfig& c) {
  return {{"n_hypotheses", c.n_hypotheses}, {"train_samples", c.train_samples},
          {"quantizer", io::to_json(c.quantizer)}, {"grid_lo", c.grid_lo},
          {"grid_hi", c.grid_hi},           {"grid_points", c.grid_points},
          {"max_ks_ldp", c.max_ks_ldp}};
}

json to_json(const CallCenterConfig& c) {
  return {{"model", io::to_json(c.model)},
          {"train_samples", c.train_samples},
          {"network", io::to_json(c.network)},
          {"training", io::to_json(c.training)},
          {"x_grid", c.x_grid},
          {"share_x", c.share_x},
          {"share_samples", c.share_samples},
          {"max_mean_error_ldp", c.max_mean_error_ldp}};
}

json to_json(const Table1Config& c) {
  return {{"train_samples", c.train_samples},
          {"test_samples", c.test_samples},
          {"network", io::to_json(c.network)},
          {"training", io::to_json(c.training)}};
}

SharesConfig shares_config_from_json(const json& j, SharesConfig c) {
  io::check_keys(j, {"n_hypotheses", "train_samples", "assignment_samples", "seeds", "quantizer", "band_lo",
                     "band_hi", "min_within", "max_chi_ratio"},
                 "fig1 config");
  read_if(j, "n_hypotheses", c.n_hypotheses);
  read_if(j, "train_samples", c.train_samples);
  read_if(j, "assignment_samples", c.assignment_samples);
  read_if(j, "seeds", c.seeds);
  if (j.contains("quantizer")) c.quantizer = io::train_config_from_json(j.at("quantizer"), c.quantizer);
  read_if(j, "band_lo", c.band_lo);
  read_if(j, "band_hi", c.band_hi);
  read_if(j, "min_within", c.min_within);
  read_if(j, "max_chi_ratio", c.max_chi_ratio);
  return c;
}

DensityConfig density_config_from_json(const json& j, DensityConfig c) {
  io::check_keys(j, {"n_hypotheses", "train_samples", "quantizer", "grid_lo", "grid_hi", "grid_points", "max_ks_ldp"},
                 "density config");
  read_if(j, "n_hypotheses", c.n_hypotheses);
  read_if(j, "train_samples", c.train_samples);
  if (j.contains("quantizer")) c.quantizer = io::train_config_from_json(j.at("quantizer"), c.quantizer);
  read_if(j, "grid_lo", c.grid_lo);
  read_if(j, "grid_hi", c.grid_hi);
  read_if(j, "grid_points", c.grid_points);
  read_if(j, "max_ks_ldp", c.max_ks_ldp);
  return c;
}

CallCenterConfig call_center_config_from_json(const json& j, CallCenterConfig c) {
  io::check_keys(j, {"model", "train_samples", "network", "training", "x_grid", "share_x", "share_samples",
                     "max_mean_error_ldp"},
                 "callcenter config");
  if (j.contains("model")) c.model = io::call_center_from_json(j.at("model"), c.model);
  read_if(j, "train_samples", c.train_samples);
  if (j.contains("network")) c.network = io::network_spec_from_json(j.at("network"), c.network);
  if (j.contains("training")) c.training = io::train_config_from_json(j.at("training"), c.training);
  read_if(j, "x_grid", c.x_grid);
  read_if(j, "share_x", c.share_x);
  read_if(j, "share_samples", c.share_samples);
  read_if(j, "max_mean_error_ldp", c.max_mean_error_ldp);
  return c;
}

Table1Config table1_config_from_json(const json& j, Table1Config c) {
  io::check_keys(j, {"train_samples", "test_samples", "network", "training"}, "table1-surrogate config");
  read_if(j, "train_samples", c.train_samples);
  read_if(j, "test_samples", c.test_samples);
  if (j.contains("network")) c.network = io::network_spec_from_json(j.at("network"), c.network);
  if (j.contains("training")) c.training = io::train_config_from_json(j.at("training"), c.training);
  return c;
}

// ---------------------------------------------------------------------------

json summarize(const SharesResult& r) {
  return {{"median_within_ldp", r.median_within_ldp},
          {"median_chi_ratio", r.median_chi_ratio},
          {"pass", r.pass}};
}

json summarize(const DensityResult& r) {
  return {{"ks_l2_p", r.ks_l2_p},     {"ks_l2_p_cube_root", r.ks_l2_cube}, {"ks_ldp_p", r.ks_ldp_p},
          {"ks_ldp_p_cube_root", r.ks_ldp_cube}, {"pass", r.pass}};
}

json summarize(const CallCenterResult& r) {
  return {{"l2", io::to_json(r.l2.errors)},
          {"ldp", io::to_json(r.ldp.errors)},
          {"mean_order", r.mean_order},
          {"mean_bound", r.mean_bound},
          {"var_order", r.var_order},
          {"pass", r.pass}};
}

json summarize(const Table1Outcome& r) {
  return {{"l2", {{"norm", r.nll.l2.norm.nll_per_sample}, {"kde", r.nll.l2.kde.nll_per_sample}}},
          {"ldp", {{"norm", r.nll.ldp.norm.nll_per_sample}, {"kde", r.nll.ldp.kde.nll_per_sample}}},
          {"pass", r.pass}};
}

void write_bundle(const fs::path& dir, const SharesConfig& cfg, const SharesResult& r) {
  io::write_json(dir / "config.json", to_json(cfg));
  std::string csv = "seed,within_l2,within_ldp,chi_l2,chi_ldp\n";
  for (const auto& s : r.seeds)
    csv += std::to_string(s.seed) + "," + io::format_double(s.within_l2) + "," + io::format_double(s.within_ldp) +
           "," + io::format_double(s.chi_l2) + "," + io::format_double(s.chi_ldp) + "\n";
  write_text(dir / "seeds.csv", csv);
  io::write_hypotheses_csv(dir / "hypotheses_l2.csv", r.hyps_l2);
  io::write_hypotheses_csv(dir / "hypotheses_ldp.csv", r.hyps_ldp);
  io::write_shares_csv(dir / "shares_l2.csv", r.shares_l2);
  io::write_shares_csv(dir / "shares_ldp.csv", r.shares_ldp);
  io::write_json(dir / "summary.json", summarize(r));
}

void write_bundle(const fs::path& dir, const DensityConfig& cfg, const DensityResult& r) {
  io::write_json(dir / "config.json", to_json(cfg));
  io::write_hypotheses_csv(dir / "hypotheses_l2.csv", r.hyps_l2);
  io::write_hypotheses_csv(dir / "hypotheses_ldp.csv", r.hyps_ldp);
  io::write_json(dir / "summary.json", summarize(r));
}

void write_bundle(const fs::path& dir, const CallCenterConfig& cfg, const CallCenterResult& r) {
  io::write_json(dir / "config.json", to_json(cfg));
  for (const auto* run : {&r.l2, &r.ldp}) {
    const std::string tag = run == &r.l2 ? "l2" : "ldp";
    run->model.save(dir / ("model_" + tag + ".json"));
    io::write_history_csv(dir / ("history_" + tag + ".csv"), run->history);
    io::write_moment_curve_csv(dir / ("moments_" + tag + ".csv"), run->rows);
    for (std::size_t k = 0; k < run->shares.size(); ++k)
      io::write_shares_csv(dir / ("shares_" + tag + "_" + x_tag(cfg.share_x[k]) + ".csv"), run->shares[k]);
  }
  io::write_json(dir / "summary.json", summarize(r));
}

void write_bundle(const fs::path& dir, const Table1Config& cfg, const Table1Outcome& r) {
  io::write_json(dir / "config.json", to_json(cfg));
  io::write_history_csv(dir / "history_l2.csv", r.history_l2);
  io::write_history_csv(dir / "history_ldp.csv", r.history_ldp);
  io::write_json(dir / "nll.json", {{"schema_version", io::kSchemaVersion},
                                    {"l2", {{"norm", io::to_json(r.nll.l2.norm)}, {"kde", io::to_json(r.nll.l2.kde)}}},
                                    {"ldp", {{"norm", io::to_json(r.nll.ldp.norm)}, {"kde", io::to_json(r.nll.ldp.kde)}}}});
  io::write_json(dir / "summary.json", summarize(r));
}

// ---------------------------------------------------------------------------

ReproResult repro(const fs::path& out, const ReproOptions& opts, std::ostream* log) {
  for (const auto& name : opts.experiments)
    if (std::find(experiment_names().begin(), experiment_names().end(), name) == experiment_names().end())
      throw UsageError("unknown experiment '" + name + "'");
  if (!opts.overrides.is_object()) throw UsageError("experiment overrides must be a JSON object");
  for (const auto& [key, value] : opts.overrides.items())
    if (std::find(experiment_names().begin(), experiment_names().end(), key) == experiment_names().end())
      throw UsageError("unknown experiment '" + key + "' in overrides");

  auto override_for = [&](const std::string& name) {
    return opts.overrides.contains(name) ? opts.overrides.at(name) : json::object();
  };

  ReproResult result;
  result.pass = true;
  json experiments = json::object();
  for (const auto& name : opts.experiments) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = out / name;
    json summary;
    if (name == "fig1") {
      const auto cfg = shares_config_from_json(override_for(name), SharesConfig::preset(opts.preset));
      const auto r = run_shares(cfg, opts.seed, opts.threads);
      write_bundle(dir, cfg, r);
      summary = summarize(r);
    } else if (name == "density") {
      const auto cfg = density_config_from_json(override_for(name), DensityConfig::preset(opts.preset));
      const auto r = run_density(cfg, opts.seed);
      write_bundle(dir, cfg, r);
      summary = summarize(r);
    } else if (name == "callcenter") {
      const auto cfg = call_center_config_from_json(override_for(name), CallCenterConfig::preset(opts.preset));
      const auto r = run_call_center(cfg, opts.seed, opts.threads);
      write_bundle(dir, cfg, r);
      summary = summarize(r);
    } else {
      const auto cfg = table1_config_from_json(override_for(name), Table1Config::preset(opts.preset));
      const auto r = run_table1(cfg, opts.seed, opts.threads);
      write_bundle(dir, cfg, r);
      summary = summarize(r);
    }
    const bool pass = summary.at("pass").get<bool>();
    result.pass = result.pass && pass;
    experiments[name] = summary;
    if (log) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *log << name << ": " << (pass ? "pass" : "FAIL") << " (" << io::format_double(std::round(sec * 10) / 10)
           << " s)\n";
    }
  }
  result.summary = {{"schema_version", io::kSchemaVersion},
                    {"preset", to_string(opts.preset)},
                    {"seed", opts.seed},
                    {"experiments", experiments},
                    {"pass", result.pass}};
  io::write_json(out / "summary.json", result.summary);
  return result;
}

} // namespace dpmhp::experiments

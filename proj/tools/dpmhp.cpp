// dpmhp: data generation, quantizer fitting, MHP training, evaluation and
// the full reproduction run.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical, 4 repro thresholds not met.

#include "dpmhp/datasets.hpp"
#include "dpmhp/error.hpp"
#include "dpmhp/evaluation.hpp"
#include "dpmhp/experiments.hpp"
#include "dpmhp/io.hpp"
#include "dpmhp/quantizer.hpp"
#include "dpmhp/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpmhp;

namespace {

constexpr int kThresholdsNotMet = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  unsigned threads = 1;
};

json load_config(const Common& c) {
  if (c.config.empty()) return json::object();
  json j = io::read_json(c.config);
  if (!j.is_object()) throw UsageError(c.config + ": config must be a JSON object");
  return j;
}

// Pops `key` from the config when present.
template <class T>
std::optional<T> take(json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  try {
    T v = j.at(key).get<T>();
    j.erase(key);
    return v;
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_leftovers(const json& j, const std::string& where) {
  for (const auto& [key, value] : j.items()) throw UsageError("unknown key '" + key + "' in " + where + " config");
}

std::uint64_t resolve_seed(const Common& c, json& cfg) {
  auto from_file = take<std::uint64_t>(cfg, "seed");
  return c.seed.value_or(from_file.value_or(0));
}

// ---------------------------------------------------------------------------

struct GenData {
  std::string kind;
  std::size_t k = 0;
  bool k_set = false;
};

int cmd_gen_data(const Common& c, GenData g) {
  json cfg = load_config(c);
  const std::uint64_t seed = resolve_seed(c, cfg);
  auto kind = take<std::string>(cfg, "kind");
  auto k = take<std::size_t>(cfg, "k");
  CallCenterModel cc;
  if (cfg.contains("call_center")) {
    cc = io::call_center_from_json(cfg.at("call_center"), cc);
    cfg.erase("call_center");
  }
  reject_leftovers(cfg, "gen-data");
  if (g.kind.empty()) g.kind = kind.value_or("");
  if (!g.k_set && k) g.k = *k;
  if (g.kind.empty()) throw UsageError("gen-data needs --kind");
  if (g.k < 1) throw UsageError("gen-data needs --k >= 1");

  Dataset d;
  json params = json::object();
  if (g.kind == "call-center") {
    cc.validate();
    d = sample_call_center(cc, g.k, seed);
    params = io::to_json(cc);
  } else if (g.kind == "fig1" || g.kind == "normal") {
    const MixtureModel mix = g.kind == "fig1" ? fig1_mixture() : standard_normal(1);
    d.feature_dim = 0;
    d.label_dim = mix.dim();
    d.labels = sample_mixture(mix, g.k, seed);
  } else if (g.kind == "surrogate") {
    d = sample_conditional_surrogate(g.k, seed);
  } else {
    throw UsageError("unknown --kind '" + g.kind + "' (call-center, fig1, normal, surrogate)");
  }

  const fs::path out(c.out);
  io::write_dataset_csv(out / "data.csv", d);
  io::write_json(out / "data.json", {{"schema_version", io::kSchemaVersion},
                                     {"kind", g.kind},
                                     {"k", g.k},
                                     {"seed", seed},
                                     {"feature_dim", d.feature_dim},
                                     {"label_dim", d.label_dim},
                                     {"parameters", params}});
  return 0;
}

// ---------------------------------------------------------------------------

struct FitQuantizer {
  std::string data;
  std::string assign;
  std::optional<std::size_t> n;
  std::optional<std::string> metric;
  std::optional<double> delta;
  std::optional<std::size_t> epochs;
};

int cmd_fit_quantizer(const Common& c, const FitQuantizer& f) {
  json cfg = load_config(c);
  const std::uint64_t seed = resolve_seed(c, cfg);
  std::size_t n = f.n.value_or(take<std::size_t>(cfg, "n_hypotheses").value_or(0));
  std::string metric_name = f.metric.value_or(take<std::string>(cfg, "metric").value_or("ldp"));
  double delta = f.delta.value_or(take<double>(cfg, "delta").value_or(0.0));
  TrainConfig q = quantizer_defaults();
  if (cfg.contains("quantizer")) {
    q = io::train_config_from_json(cfg.at("quantizer"), q);
    cfg.erase("quantizer");
  }
  reject_leftovers(cfg, "fit-quantizer");
  if (f.epochs) q.epochs = *f.epochs;
  q.seed = seed;
  if (f.data.empty()) throw UsageError("fit-quantizer needs --data");
  if (n < 1) throw UsageError("fit-quantizer needs --n >= 1");

  const Dataset d = io::read_dataset_csv(f.data);
  if (n > d.size())
    throw DataError("N = " + std::to_string(n) + " exceeds the " + std::to_string(d.size()) + " samples");
  WtaMetric metric{metric_kind_from_string(metric_name), delta};
  if (metric.kind == MetricKind::LogDistance && !(metric.delta > 0.0))
    metric.delta = default_delta(d.labels, d.label_dim);

  const HypothesisSet h = fit_hypotheses(d.labels, d.label_dim, n, metric, q);
  std::vector<double> assign_samples = d.labels;
  if (!f.assign.empty()) {
    const Dataset a = io::read_dataset_csv(f.assign);
    if (a.label_dim != d.label_dim) throw DataError("assignment samples have a different label dimension");
    assign_samples = a.labels;
  }
  const ShareReport shares = voronoi_shares(h, assign_samples, c.threads);

  const fs::path out(c.out);
  io::write_hypotheses_csv(out / "hypotheses.csv", h);
  json report = io::to_json(shares);
  report["metric"] = io::to_json(metric);
  io::write_json(out / "shares.json", report);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainMhp {
  std::string data;
  std::optional<std::size_t> n;
  std::optional<std::string> metric;
  std::optional<std::size_t> epochs;
};

int cmd_train_mhp(const Common& c, const TrainMhp& t) {
  json cfg = load_config(c);
  const std::uint64_t seed = resolve_seed(c, cfg);
  if (t.data.empty()) throw UsageError("train-mhp needs --data");
  const Dataset d = io::read_dataset_csv(t.data);
  if (d.feature_dim == 0) throw DataError("train-mhp needs feature columns (x0..)");

  NetworkSpec spec;
  spec.input_dim = d.feature_dim;
  spec.label_dim = d.label_dim;
  TrainConfig tc;
  if (cfg.contains("network")) {
    spec = io::network_spec_from_json(cfg.at("network"), spec);
    cfg.erase("network");
  }
  if (cfg.contains("training")) {
    tc = io::train_config_from_json(cfg.at("training"), tc);
    cfg.erase("training");
  }
  reject_leftovers(cfg, "train-mhp");
  if (t.n) spec.n_hypotheses = *t.n;
  if (t.metric) tc.metric = {metric_kind_from_string(*t.metric), 0.0};
  if (t.epochs) tc.epochs = *t.epochs;
  tc.seed = seed;

  const TrainResult r = train(spec, d, tc);
  const fs::path out(c.out);
  r.model.save(out / "model.json");
  io::write_history_csv(out / "history.csv", r.history);
  return 0;
}

// ---------------------------------------------------------------------------

struct Eval {
  std::string model;
  std::string test;
  std::string compare;
  std::vector<double> share_x{8.0, 13.0, 18.0};
  std::size_t share_samples = 20000;
};

json nll_pair(const ConditionalNll& n) {
  return {{"norm", n.norm.nll_per_sample}, {"kde", n.kde.nll_per_sample}};
}

int cmd_eval(const Common& c, const Eval& e) {
  json cfg = load_config(c);
  const std::uint64_t seed = resolve_seed(c, cfg);
  CallCenterModel cc;
  if (cfg.contains("call_center")) {
    cc = io::call_center_from_json(cfg.at("call_center"), cc);
    cfg.erase("call_center");
  }
  auto grid = take<std::vector<double>>(cfg, "x_grid");
  reject_leftovers(cfg, "eval");
  if (e.model.empty()) throw UsageError("eval needs --model");

  const MhpModel model = MhpModel::load(e.model);
  std::optional<Dataset> test;
  if (!e.test.empty()) {
    test = io::read_dataset_csv(e.test);
    if (test->feature_dim != model.spec.input_dim || test->label_dim != model.spec.label_dim)
      throw DataError("test set has dimensions (" + std::to_string(test->feature_dim) + ", " +
                      std::to_string(test->label_dim) + "), model expects (" +
                      std::to_string(model.spec.input_dim) + ", " + std::to_string(model.spec.label_dim) + ")");
  }
  const fs::path out(c.out);

  if (!e.compare.empty()) {
    if (!test) throw UsageError("--compare needs --test");
    const MhpModel other = MhpModel::load(e.compare);
    if (!(other.spec == model.spec)) throw DataError("compared models have different network shapes");
    if (other.metric.kind == model.metric.kind) throw UsageError("--compare needs one l2 and one ldp model");
    const auto a = conditional_nll(model, *test, c.threads);
    const auto b = conditional_nll(other, *test, c.threads);
    const bool first_l2 = model.metric.kind == MetricKind::SquaredEuclidean;
    io::write_json(out / "compare.json", {{"schema_version", io::kSchemaVersion},
                                          {"test_count", test->size()},
                                          {"l2", nll_pair(first_l2 ? a : b)},
                                          {"ldp", nll_pair(first_l2 ? b : a)}});
    return 0;
  }

  if (model.spec.input_dim == 1 && model.spec.label_dim == 1) {
    std::vector<double> xs = grid.value_or(std::vector<double>{});
    if (xs.empty())
      for (int i = 0; i <= 28; ++i) xs.push_back(cc.x_min + (cc.x_max - cc.x_min) * i / 28.0);
    const auto rows = conditional_moment_curve(model, xs, cc);
    io::write_moment_curve_csv(out / "moments.csv", rows);
    io::write_json(out / "moment_errors.json", io::to_json(moment_curve_errors(rows)));
    Engine eng = make_stream(seed, "eval/shares");
    for (std::size_t k = 0; k < e.share_x.size(); ++k) {
      const double x = e.share_x[k];
      const auto ys = sample_call_center_at(cc, x, e.share_samples, eng());
      const std::vector<double> xv{x};
      io::write_shares_csv(out / ("shares_x" + io::format_double(x) + ".csv"),
                           voronoi_shares(model.predict(xv), ys, c.threads));
    }
  }
  if (test) {
    const auto n = conditional_nll(model, *test, c.threads);
    io::write_json(out / "nll.json", {{"schema_version", io::kSchemaVersion},
                                      {"metric", io::to_json(model.metric)},
                                      {"norm", io::to_json(n.norm)},
                                      {"kde", io::to_json(n.kde)}});
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct Repro {
  std::vector<std::string> experiments;
  std::string preset = "full";
};

int cmd_repro(const Common& c, const Repro& r) {
  json cfg = load_config(c);
  experiments::ReproOptions opts;
  opts.seed = resolve_seed(c, cfg);
  opts.threads = c.threads;
  opts.preset = experiments::preset_from_string(r.preset);
  if (!r.experiments.empty()) opts.experiments = r.experiments;
  opts.overrides = cfg;
  const auto res = experiments::repro(c.out, opts, &std::cerr);
  std::cout << res.summary.dump(2) << '\n';
  return res.pass ? 0 : kThresholdsNotMet;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-hypothesis prediction with the WTA loss under l2 and log distances"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file; flags override its values");
    sub->add_option("--seed", common.seed, "Run seed (u64)");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--threads", common.threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);
  };

  GenData gen;
  auto* s_gen = app.add_subcommand("gen-data", "Sample a dataset to <out>/data.csv with a data.json sidecar");
  add_common(s_gen);
  s_gen->add_option("--kind", gen.kind, "call-center | fig1 | normal | surrogate");
  s_gen->add_option("--k", gen.k, "Number of samples")->each([&](const std::string&) { gen.k_set = true; });

  FitQuantizer fit;
  auto* s_fit = app.add_subcommand("fit-quantizer", "Fit N unconditional hypotheses and report Voronoi shares");
  add_common(s_fit);
  s_fit->add_option("--data", fit.data, "Dataset CSV (label columns are used)");
  s_fit->add_option("--assign", fit.assign, "Samples for the share report (default: the training data)");
  s_fit->add_option("--n", fit.n, "Number of hypotheses");
  s_fit->add_option("--metric", fit.metric, "l2 | ldp");
  s_fit->add_option("--delta", fit.delta, "ldp offset (default 1e-3 x data diameter)");
  s_fit->add_option("--epochs", fit.epochs, "Training epochs");

  TrainMhp tr;
  auto* s_train = app.add_subcommand("train-mhp", "Train an MHP network; writes model.json and history.csv");
  add_common(s_train);
  s_train->add_option("--data", tr.data, "Training CSV with x and y columns");
  s_train->add_option("--n", tr.n, "Number of hypotheses");
  s_train->add_option("--metric", tr.metric, "l2 | ldp");
  s_train->add_option("--epochs", tr.epochs, "Training epochs");

  Eval ev;
  auto* s_eval = app.add_subcommand("eval", "Moment curves, shares and NLL reports for trained models");
  add_common(s_eval);
  s_eval->add_option("--model", ev.model, "Model JSON");
  s_eval->add_option("--test", ev.test, "Test CSV for NLL");
  s_eval->add_option("--compare", ev.compare, "Second model (other metric): write compare.json");
  s_eval->add_option("--share-x", ev.share_x, "Feature values for share reports (1-D models)");
  s_eval->add_option("--share-samples", ev.share_samples, "Samples per share report");

  Repro rp;
  auto* s_repro = app.add_subcommand("repro", "Run the named experiments and write a bundle with summary.json");
  add_common(s_repro);
  s_repro->add_option("--experiments", rp.experiments, "fig1 density callcenter table1-surrogate")->delimiter(',');
  s_repro->add_option("--preset", rp.preset, "full | quick");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (s_gen->parsed()) return cmd_gen_data(common, gen);
    if (s_fit->parsed()) return cmd_fit_quantizer(common, fit);
    if (s_train->parsed()) return cmd_train_mhp(common, tr);
    if (s_eval->parsed()) return cmd_eval(common, ev);
    if (s_repro->parsed()) return cmd_repro(common, rp);
  } catch (const Error& e) {
    std::cerr << "dpmhp: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "dpmhp: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  }
  return 1;
}

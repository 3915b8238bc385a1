#include "dpmhp/error.hpp"
#include "dpmhp/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace dpmhp;
using namespace dpmhp::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under `dir`, relative path -> contents.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "dpmhp_exp_test" / name;
  fs::remove_all(d);
  return d;
}

} // namespace

TEST_CASE("presets") {
  CHECK(preset_from_string("full") == Preset::Full);
  CHECK(preset_from_string("quick") == Preset::Quick);
  CHECK_THROWS_AS(preset_from_string("medium"), UsageError);

  auto s = SharesConfig::preset(Preset::Full);
  CHECK(s.n_hypotheses == 150);
  CHECK(s.assignment_samples == 100000);
  CHECK(s.seeds == 5);
  CHECK(DensityConfig::preset(Preset::Full).n_hypotheses == 100);
  auto cc = CallCenterConfig::preset(Preset::Full);
  CHECK(cc.network.n_hypotheses == 50);
  CHECK(cc.network.hidden_layers == std::vector<std::size_t>{64, 64});
  auto t1 = Table1Config::preset(Preset::Full);
  CHECK(t1.train_samples == 100000);
  CHECK(t1.test_samples == 10000);
  CHECK(t1.network.n_hypotheses == 100);
  CHECK(t1.network.label_dim == 2);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  auto s = SharesConfig::preset(Preset::Quick);
  s.seeds = 3;
  auto s2 = shares_config_from_json(to_json(s), SharesConfig::preset(Preset::Full));
  CHECK(to_json(s2) == to_json(s));
  auto c = CallCenterConfig::preset(Preset::Quick);
  c.model.alpha = 0.3;
  CHECK(to_json(call_center_config_from_json(to_json(c), CallCenterConfig{})) == to_json(c));
  auto d = DensityConfig::preset(Preset::Quick);
  CHECK(to_json(density_config_from_json(to_json(d), DensityConfig{})) == to_json(d));
  auto t = Table1Config::preset(Preset::Quick);
  CHECK(to_json(table1_config_from_json(to_json(t), Table1Config{})) == to_json(t));

  CHECK_THROWS_AS(shares_config_from_json(nlohmann::json{{"n", 3}}, s), UsageError);
  CHECK_THROWS_AS(call_center_config_from_json(nlohmann::json{{"training", {{"epoch", 1}}}}, c), UsageError);
}

TEST_CASE("quick experiments run and are deterministic") {
  auto s = run_shares(SharesConfig::preset(Preset::Quick), 1);
  CHECK(s.seeds.size() == 2);
  CHECK(s.hyps_ldp.size() == 30);
  CHECK(s.shares_l2.sample_count == 10000);
  auto s2 = run_shares(SharesConfig::preset(Preset::Quick), 1);
  CHECK(s2.hyps_ldp == s.hyps_ldp);
  CHECK(s2.median_chi_ratio == s.median_chi_ratio);
  auto s3 = run_shares(SharesConfig::preset(Preset::Quick), 2);
  CHECK_FALSE(s3.hyps_ldp == s.hyps_ldp);

  auto d = run_density(DensityConfig::preset(Preset::Quick), 1);
  CHECK(d.hyps_l2.size() == 20);
  CHECK(d.ks_l2_p > 0.0);

  auto cc = run_call_center(CallCenterConfig::preset(Preset::Quick), 1);
  CHECK(cc.l2.rows.size() == 5);
  CHECK(cc.ldp.shares.size() == 3);
  CHECK(cc.ldp.model.metric.kind == MetricKind::LogDistance);
  CHECK(cc.l2.model.metric.kind == MetricKind::SquaredEuclidean);
  CHECK(cc.pass == (cc.mean_order && cc.mean_bound && cc.var_order));

  auto t = run_table1(Table1Config::preset(Preset::Quick), 1);
  CHECK(t.nll.l2.norm.test_count == 300);
  CHECK(t.history_ldp.epoch_loss.size() == 2);
}

TEST_CASE("shares experiment separates the metrics at moderate size") {
  auto cfg = SharesConfig::preset(Preset::Quick);
  cfg.n_hypotheses = 40;
  cfg.train_samples = 8000;
  cfg.assignment_samples = 40000;
  cfg.seeds = 3;
  cfg.quantizer.epochs = 40;
  cfg.quantizer.lr_decay_every = 10;
  auto r = run_shares(cfg, 3);
  CHECK(r.median_chi_ratio < 0.5);
  CHECK(r.median_within_ldp >= 0.9);
}

TEST_CASE("repro bundles are byte-identical across runs") {
  ReproOptions opts;
  opts.preset = Preset::Quick;
  opts.seed = 9;
  opts.overrides = {{"callcenter", {{"x_grid", {7.0, 13.0}}}}};
  auto a = fresh_dir("a"), b = fresh_dir("b");
  auto ra = repro(a, opts);
  auto rb = repro(b, opts);
  CHECK(ra.summary == rb.summary);
  const auto ta = tree(a), tb = tree(b);
  CHECK(ta.size() == 31);
  CHECK(ta == tb);
  CHECK(ta.count("summary.json") == 1);
  CHECK(ta.count("table1-surrogate/nll.json") == 1);
  CHECK(ta.count("callcenter/moments_ldp.csv") == 1);
  CHECK(ra.summary.at("experiments").size() == 4);

  // the seed reaches every experiment
  opts.seed = 10;
  auto c = fresh_dir("c");
  repro(c, opts);
  const auto tc = tree(c);
  for (const char* f : {"fig1/hypotheses_ldp.csv", "density/hypotheses_l2.csv", "callcenter/model_ldp.json",
                        "table1-surrogate/nll.json"})
    CHECK(tc.at(f) != ta.at(f));
}

TEST_CASE("repro argument errors") {
  ReproOptions opts;
  opts.preset = Preset::Quick;
  opts.experiments = {"fig2"};
  CHECK_THROWS_AS(repro(fresh_dir("e"), opts), UsageError);
  opts.experiments = {"density"};
  opts.overrides = {{"densty", nlohmann::json::object()}};
  CHECK_THROWS_AS(repro(fresh_dir("e"), opts), UsageError);
  opts.overrides = {{"density", {{"grid_points", 1}}}};
  CHECK_THROWS_AS(repro(fresh_dir("e"), opts), DataError);
}

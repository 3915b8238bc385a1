#pragma once

#include "dpmhp/datasets.hpp"
#include "dpmhp/evaluation.hpp"
#include "dpmhp/mhp_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpmhp::experiments {

enum class Preset { Full, Quick };

Preset preset_from_string(const std::string& name);
std::string to_string(Preset preset);

// ---------------------------------------------------------------------------
// Equal shares on the 2-D mixture: one l2 and one ldp quantizer per seed,
// shares measured on fresh assignment samples.

struct SharesConfig {
  std::size_t n_hypotheses = 150;
  std::size_t train_samples = 20000;
  std::size_t assignment_samples = 100000;
  std::size_t seeds = 5;
  TrainConfig quantizer;  // metric ignored
  double band_lo = 0.5;   // shares counted within [band_lo / N, band_hi / N]
  double band_hi = 2.0;
  double min_within = 0.9;
  double max_chi_ratio = 0.25;

  static SharesConfig preset(Preset p);
};

struct SharesSeed {
  std::uint64_t seed = 0;
  double within_l2 = 0.0;
  double within_ldp = 0.0;
  double chi_l2 = 0.0;
  double chi_ldp = 0.0;
};

struct SharesResult {
  std::vector<SharesSeed> seeds;
  double median_within_ldp = 0.0;
  double median_chi_ratio = 0.0;  // median over seeds of chi_ldp / chi_l2
  HypothesisSet hyps_l2, hyps_ldp;  // first seed
  ShareReport shares_l2, shares_ldp;
  bool pass = false;
};

SharesResult run_shares(const SharesConfig& cfg, std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Density exponent on the 1-D standard normal.

struct DensityConfig {
  std::size_t n_hypotheses = 100;
  std::size_t train_samples = 100000;
  TrainConfig quantizer;
  double grid_lo = -8.0;
  double grid_hi = 8.0;
  std::size_t grid_points = 16001;
  double max_ks_ldp = 0.07;

  static DensityConfig preset(Preset p);
};

struct DensityResult {
  double ks_l2_p = 0.0, ks_l2_cube = 0.0;  // against p and p^(1/3)
  double ks_ldp_p = 0.0, ks_ldp_cube = 0.0;
  HypothesisSet hyps_l2, hyps_ldp;
  bool pass = false;
};

DensityResult run_density(const DensityConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Call-center conditional moments.

struct CallCenterConfig {
  CallCenterModel model;
  std::size_t train_samples = 50000;
  NetworkSpec network;
  TrainConfig training;  // metric replaced per run; everything else shared
  std::vector<double> x_grid;
  std::vector<double> share_x{8.0, 13.0, 18.0};
  std::size_t share_samples = 20000;
  double max_mean_error_ldp = 0.10;

  static CallCenterConfig preset(Preset p);
};

struct CallCenterRun {
  MhpModel model;
  TrainingHistory history;
  std::vector<MomentRow> rows;
  MomentErrors errors;
  std::vector<ShareReport> shares;  // one per share_x
};

struct CallCenterResult {
  CallCenterRun l2, ldp;
  bool mean_order = false;  // ldp mean error below l2
  bool mean_bound = false;  // ldp mean error below the bound
  bool var_order = false;
  bool pass = false;
};

CallCenterResult run_call_center(const CallCenterConfig& cfg, std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Conditional NLL on the 4-D -> 2-D surrogate under both estimators.

struct Table1Config {
  std::size_t train_samples = 100000;
  std::size_t test_samples = 10000;
  NetworkSpec network;
  TrainConfig training;

  static Table1Config preset(Preset p);
};

struct Table1Outcome {
  Table1Result nll;
  TrainingHistory history_l2, history_ldp;
  bool pass = false;
};

Table1Outcome run_table1(const Table1Config& cfg, std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Configs as JSON. Readers start from `defaults`; unknown keys are errors.

nlohmann::json to_json(const SharesConfig& c);
nlohmann::json to_json(const DensityConfig& c);
nlohmann::json to_json(const CallCenterConfig& c);
nlohmann::json to_json(const Table1Config& c);
SharesConfig shares_config_from_json(const nlohmann::json& j, SharesConfig defaults);
DensityConfig density_config_from_json(const nlohmann::json& j, DensityConfig defaults);
CallCenterConfig call_center_config_from_json(const nlohmann::json& j, CallCenterConfig defaults);
Table1Config table1_config_from_json(const nlohmann::json& j, Table1Config defaults);

// ---------------------------------------------------------------------------
// Output bundles. Every file is a pure function of config and seed; wall
// times are never written.

nlohmann::json summarize(const SharesResult& r);
nlohmann::json summarize(const DensityResult& r);
nlohmann::json summarize(const CallCenterResult& r);
nlohmann::json summarize(const Table1Outcome& r);

void write_bundle(const std::filesystem::path& dir, const SharesConfig& cfg, const SharesResult& r);
void write_bundle(const std::filesystem::path& dir, const DensityConfig& cfg, const DensityResult& r);
void write_bundle(const std::filesystem::path& dir, const CallCenterConfig& cfg, const CallCenterResult& r);
void write_bundle(const std::filesystem::path& dir, const Table1Config& cfg, const Table1Outcome& r);

struct ReproOptions {
  std::vector<std::string> experiments{"fig1", "density", "callcenter", "table1-surrogate"};
  Preset preset = Preset::Full;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  nlohmann::json overrides = nlohmann::json::object();  // keyed by experiment name
};

struct ReproResult {
  nlohmann::json summary;  // also written as summary.json
  bool pass = false;
};

/// Runs each named experiment, writes `<out>/<name>/...` and
/// `<out>/summary.json`. Progress and timings go to `log` when given.
ReproResult repro(const std::filesystem::path& out, const ReproOptions& opts, std::ostream* log = nullptr);

const std::vector<std::string>& experiment_names();

} // namespace dpmhp::experiments

#pragma once

#include "dpmhp/datasets.hpp"
#include "dpmhp/evaluation.hpp"
#include "dpmhp/mhp_model.hpp"
#include "dpmhp/wta_loss.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace dpmhp::io {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Header `x0..x{m-1},y0..y{n-1}`, one row per pair.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Header `h0..h{n-1}`, one row per hypothesis.
void write_hypotheses_csv(const std::filesystem::path& path, const HypothesisSet& hyps);
HypothesisSet read_hypotheses_csv(const std::filesystem::path& path);

/// Columns: hypothesis, count, share.
void write_shares_csv(const std::filesystem::path& path, const ShareReport& report);

/// Columns: x, hyp_mean, true_mean, hyp_var, true_var.
void write_moment_curve_csv(const std::filesystem::path& path, const std::vector<MomentRow>& rows);

/// Columns: epoch, loss, alive_hypotheses, epsilon, learning_rate.
void write_history_csv(const std::filesystem::path& path, const TrainingHistory& history);

nlohmann::json to_json(const ShareReport& report);
nlohmann::json to_json(const NllReport& report);
nlohmann::json to_json(const MomentErrors& errors);

/// Config objects. The readers start from `defaults` and override only the
/// keys present, so a config file may be partial. Unknown keys are errors.
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const NetworkSpec& spec);
nlohmann::json to_json(const CallCenterModel& model);
nlohmann::json to_json(const WtaMetric& metric);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults);
NetworkSpec network_spec_from_json(const nlohmann::json& j, NetworkSpec defaults);
CallCenterModel call_center_from_json(const nlohmann::json& j, CallCenterModel defaults);

/// Throws UsageError naming the first key of `j` not in `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace dpmhp::io

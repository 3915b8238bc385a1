#pragma once

#include "dpmhp/datasets.hpp"
#include "dpmhp/metrics.hpp"
#include "dpmhp/network.hpp"
#include "dpmhp/optimizer.hpp"
#include "dpmhp/wta_loss.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dpmhp {

/// Relaxation weight for non-winners: starts at `initial` and decays
/// linearly to zero at `anneal_fraction` of the run, then stays at zero.
struct EpsilonSchedule {
  double initial = 0.05;
  double anneal_fraction = 0.5;
  double at(std::size_t epoch, std::size_t epochs) const;
};

struct TrainConfig {
  /// For LogDistance, delta <= 0 selects 1e-3 times the label-set diameter.
  WtaMetric metric{MetricKind::LogDistance, 0.0};
  EpsilonSchedule epsilon;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;         // multiplied in every `lr_decay_every` epochs
  std::size_t lr_decay_every = 0;  // 0: constant rate
  OptimizerConfig optimizer;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  /// Start the output-layer biases at N distinct training labels instead of 0.
  bool bias_from_labels = true;

  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

/// Per-dimension affine map x -> (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(std::span<const double> rows, std::size_t dim);
  void apply(std::span<const double> in, std::span<double> out) const;
};

/// Isotropic label frame: labels are handled internally as (y - center) / scale.
/// A single scale keeps both metrics' argmin structure intact.
struct LabelFrame {
  std::vector<double> center;
  double scale = 1.0;

  static LabelFrame fit(std::span<const double> rows, std::size_t dim);
};

struct MhpModel {
  NetworkSpec spec;
  NetworkParams params;
  Standardizer input;
  LabelFrame labels;
  WtaMetric metric;  // in original label units

  /// Hypotheses at a raw (unstandardized) feature vector, in label units.
  HypothesisSet predict(std::span<const double> x) const;
  HypothesisSet predict(std::span<const double> x, NetworkWorkspace& ws) const;

  void save(const std::filesystem::path& path) const;
  static MhpModel load(const std::filesystem::path& path);
  std::string to_json_text() const;
  static MhpModel from_json_text(const std::string& text);
};

struct TrainingHistory {
  std::vector<double> epoch_loss;               // mean WTA loss per epoch, label units
  std::vector<std::size_t> alive_hypotheses;    // hypotheses that won at least one sample
  std::vector<double> epsilon;
  std::vector<double> learning_rate;
};

struct TrainResult {
  MhpModel model;
  TrainingHistory history;
};

/// Mini-batch training of an MHP network on (x, y) pairs. Deterministic for a
/// fixed config. Throws NumericalError naming the epoch if the loss diverges.
TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& cfg);

/// Continues training from `init` (standardization and label frame kept;
/// the metric and schedule come from `cfg`, output biases are not reseeded).
TrainResult train_from(const MhpModel& init, const Dataset& data, const TrainConfig& cfg);

/// Mean WTA loss of a model over a dataset (epsilon = 0), label units.
double mean_wta_loss(const MhpModel& model, const Dataset& data);

} // namespace dpmhp

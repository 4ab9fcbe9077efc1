#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asymnet/analysis.hpp"
#include "asymnet/network.hpp"
#include "asymnet/pruning.hpp"
#include "asymnet/training.hpp"

namespace asymnet {

enum class ExperimentKind : std::uint8_t { train, prune, analyze_gaussian, analyze_sorting, repeatability };
enum class DataSource : std::uint8_t { gaussian, mnist, cifar10, cache };

struct DatasetSpec {
  DataSource source = DataSource::gaussian;
  /// Relative paths resolve against the config file's directory.
  std::filesystem::path images;
  std::filesystem::path labels;
  std::vector<std::filesystem::path> batches;  // cifar10
  std::filesystem::path cache;
  /// gaussian: samples drawn; file sources: first-N-after-shuffle subset (0 keeps all).
  std::size_t samples = 0;
  double validation_fraction = 0.2;
  bool autoassociative = false;
  bool flatten = false;
  bool operator==(const DatasetSpec&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Activation base = Activation::relu;
  Activation head = Activation::none;
  /// Gaussian experiments: one hidden layer fitted as a shallow model.
  bool shallow = false;
  bool tied = true;
  bool operator==(const NetworkSpec&) const = default;
};

struct TrainSpec {
  OptimizerConfig optimizer;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  LossKind loss = LossKind::softmax_cross_entropy;
  bool compensate = false;
  bool operator==(const TrainSpec&) const = default;
};

struct AnalysisSpec {
  // Shallow fits.
  std::size_t iterations = 200000;
  double fit_rate = 0.05;
  std::size_t stages = 0;  // 0: single fit with the profile
  double epsilon = 1e-8;
  // Removal curves.
  std::vector<double> fractions{0.0, 0.5, 0.9};
  std::vector<ImportanceMeasure> measures{ImportanceMeasure::node_index, ImportanceMeasure::random};
  /// Weighted layer the curves and reconstruction use; -1 picks the first hidden layer.
  std::int64_t layer = -1;
  // Correlations and reconstructions.
  std::size_t samples = 30;
  double mu = 0.01;
  std::vector<std::size_t> node_counts;
  // Repeatability.
  std::size_t runs = 5;
  bool same_data = true;
  WeightView weights = WeightView::effective;
  bool operator==(const AnalysisSpec&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::train;
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  DatasetSpec dataset;
  NetworkSpec network;
  ProfilePlan profile;
  TrainSpec training;
  PruneConfig prune;
  AnalysisSpec analysis;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Fixed offsets added to the master seed for each consumer.
enum class SeedStream : std::uint64_t { data = 1, split = 2, init = 3, train = 4, analysis = 5 };
std::uint64_t derive_seed(const ExperimentConfig& config, SeedStream stream);

/// Parses the line-oriented format:
///
///   # comment
///   [section]
///   key = value
///
/// Unknown sections or keys, duplicates and malformed values raise
/// ConfigError with the line number. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError for settings that cannot work together.
void validate_config(const ExperimentConfig& config);

/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::string_view to_string(ExperimentKind k);
std::string_view to_string(DataSource s);

/// Layer list syntax: comma-separated dense:W, conv:C:K[:same|valid], pool, flatten.
std::vector<LayerSpec> parse_layers(std::string_view text);
std::string format_layers(const std::vector<LayerSpec>& layers);

}  // namespace asymnet

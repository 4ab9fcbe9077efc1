#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "asymnet/analysis.hpp"
#include "asymnet/config.hpp"

namespace asymnet {

inline constexpr std::string_view kVersion = "0.1.0";

struct PreparedData {
  Dataset train;
  /// Empty when validation_fraction is 0.
  Dataset validation;
};

/// Loads (or samples) the configured source and applies subset/flatten/autoassociative.
Dataset load_source(const ExperimentConfig& config);
/// load_source plus the seeded train/validation split.
PreparedData prepare_data(const ExperimentConfig& config);

/// Network for `input_shape` from the layer list, profile plan and init seed.
Network build_from_config(const ExperimentConfig& config, const Shape& input_shape);
TrainConfig train_config(const ExperimentConfig& config);

/// Same config with every profile value equal to one and no rate compensation.
ExperimentConfig symmetric_twin(const ExperimentConfig& config);
/// Same config under another master seed.
ExperimentConfig with_seed(const ExperimentConfig& config, std::uint64_t seed);

struct TrainOutcome {
  Network network;
  std::vector<EpochRecord> records;
};

TrainOutcome train_network(const ExperimentConfig& config, const PreparedData& data,
                           const EpochCallback& on_epoch = {});

/// Shallow-model path for gaussian configs.
ShallowModel shallow_from_config(const ExperimentConfig& config, std::size_t inputs);
FitResult fit_from_config(const ExperimentConfig& config, const Dataset& data);
/// Two dense layers (encoder with profile, profile-free linear decoder), zero biases.
Network shallow_to_network(const ShallowModel& model);

struct RunResult {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
  std::string summary;
};

/// Trains and writes model.asym, train.csv and manifest.txt.
RunResult cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const EpochCallback& on_epoch = {});
/// Prunes and retrains; writes pruned.asym, trace.csv, summary.txt and manifest.txt.
RunResult cmd_prune(const ExperimentConfig& config, const std::filesystem::path& model_path,
                    const std::filesystem::path& out_dir);
/// Runs the analysis named by config.kind (analyze-gaussian, repeatability;
/// anything else runs the sorting analyses) and writes its CSVs.
RunResult cmd_analyze(const ExperimentConfig& config, const std::filesystem::path& model_path,
                      const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, std::string_view command, const ExperimentConfig& config);

}  // namespace asymnet

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "asymnet/datasets.hpp"
#include "asymnet/network.hpp"
#include "asymnet/training.hpp"

namespace asymnet {

enum class LayerOrder : std::uint8_t { by_node_count_desc, given };

/// Which split supplies the accuracy that gates each removal.
enum class GateSet : std::uint8_t { validation, train };

struct PruneConfig {
  /// target = target_fraction * accuracy of the unpruned net on the target set.
  double target_fraction = 0.9;
  LayerOrder layer_order = LayerOrder::by_node_count_desc;
  /// Layer indices for LayerOrder::given (hidden weighted layers only).
  std::vector<std::size_t> given_order;
  std::size_t retrain_epochs = 0;
  GateSet gate = GateSet::validation;
  bool operator==(const PruneConfig&) const = default;
};

struct RemovalStep {
  std::size_t layer = 0;
  /// Index within the layer at the time of removal.
  std::size_t node = 0;
  /// Gate accuracy measured just before the removal.
  double accuracy = 0.0;
};

struct LayerSummary {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::dense;
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::size_t weights_before = 0;
  std::size_t weights_after = 0;
  double ratio() const {
    return weights_before == 0 ? 1.0 : static_cast<double>(weights_after) / static_cast<double>(weights_before);
  }
};

struct PruneReport {
  GateSet gate = GateSet::validation;
  double target_fraction = 0.0;
  /// Accuracy of the unpruned net on the target set, and the resulting target.
  double reference_accuracy = 0.0;
  double target = 0.0;
  /// Gate-set accuracies.
  double accuracy_before = 0.0;
  double accuracy_after_pruning = 0.0;
  double accuracy_after_retraining = 0.0;
  std::size_t weights_before = 0;
  std::size_t weights_after = 0;
  double ratio = 1.0;
  std::vector<std::size_t> visit_order;
  std::vector<LayerSummary> layers;
  std::vector<RemovalStep> trace;
};

/// Hidden weighted layers by output node count, largest first; ties go to the
/// deeper layer.
std::vector<std::size_t> layer_visit_order(const Network& net);

struct PruneResult {
  Network network;
  PruneReport report;
};

/// Importance-ordered pruning. Layers are visited in order; inside a layer the
/// nodes are considered from last to first, and before each removal the gate
/// accuracy is measured: at or below target ends that layer, otherwise the
/// node goes. The first node of a layer is never removed.
PruneResult prune(const Network& net, const Dataset& target_set, const Dataset& gate_set, const PruneConfig& config);
/// Target and gate both from `validation`.
PruneResult prune(const Network& net, const Dataset& validation, const PruneConfig& config);

/// prune() with the target taken from `train_set` and the gate chosen by
/// config.gate, then config.retrain_epochs of training on `train_set`.
/// `train_config.epochs` is overridden by config.retrain_epochs.
PruneResult prune_and_retrain(const Network& net, const Dataset& train_set, const Dataset& validation,
                              const PruneConfig& config, const TrainConfig& train_config);

enum class ImportanceMeasure : std::uint8_t { node_index, random, l2_norm, l1_norm, correlation };

std::string_view to_string(ImportanceMeasure m);
ImportanceMeasure parse_importance(std::string_view text);

/// Per-node scores of a dense/conv layer.
///   l2_norm, l1_norm: norm of the node's incoming weights (flattened filter)
///   correlation: max |cosine| against any other node of the layer
///   random: position of the node in an rng permutation
///   node_index: the index itself
std::vector<double> importance_scores(const Network& net, std::size_t layer, ImportanceMeasure measure, Rng& rng);

/// Nodes in the order they are removed: node_index last-to-first, norms
/// smallest first, correlation most redundant first, random by permutation.
/// Ties keep index order.
std::vector<std::size_t> removal_order(const Network& net, std::size_t layer, ImportanceMeasure measure, Rng& rng);

/// Removes a set of nodes from one layer (indices refer to the original net).
Network remove_nodes(const Network& net, std::size_t layer, std::vector<std::size_t> nodes);

/// Number of nodes a fraction removes from an n-node layer: floor(f * n),
/// capped at n - 1.
std::size_t removal_count(double fraction, std::size_t nodes);

/// Accuracy on `data` after removing the first removal_count(f, n) nodes of
/// `order`, for every fraction f in [0, 1). `net` is not modified.
std::vector<double> removal_curve(const Network& net, const Dataset& data, std::size_t layer,
                                  const std::vector<std::size_t>& order, const std::vector<double>& fractions);

void write_trace_csv(std::ostream& os, const PruneReport& report);
/// Plain-text table: one row per weighted layer with node and weight counts.
void write_prune_summary(std::ostream& os, const PruneReport& report);

}  // namespace asymnet

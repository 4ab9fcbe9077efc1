#include "asymnet/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "asymnet/csv.hpp"
#include "asymnet/errors.hpp"

namespace asymnet {

namespace {

const Layer& weighted_layer(const Network& net, std::size_t layer) {
  if (layer >= net.size()) {
    throw IndexError("layer index " + std::to_string(layer) + " out of range (" + std::to_string(net.size()) +
                     " layers)");
  }
  const auto& l = net.layer(layer);
  if (!l.weighted()) {
    throw UnsupportedLayerError("importance is undefined for " + std::string(to_string(l.kind)) + " layer " +
                                std::to_string(layer));
  }
  return l;
}

std::vector<LayerSummary> summarize(const Network& before, const Network& after) {
  std::vector<LayerSummary> out;
  for (auto i : before.weighted_layers()) {
    LayerSummary s;
    s.layer = i;
    s.kind = before.layer(i).kind;
    s.nodes_before = before.layer(i).output_nodes();
    s.nodes_after = after.layer(i).output_nodes();
    s.weights_before = before.layer(i).parameter_count();
    s.weights_after = after.layer(i).parameter_count();
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> resolve_order(const Network& net, const PruneConfig& config) {
  if (config.layer_order == LayerOrder::by_node_count_desc) return layer_visit_order(net);
  const auto hidden = net.hidden_layers();
  for (auto l : config.given_order) {
    if (std::find(hidden.begin(), hidden.end(), l) == hidden.end()) {
      throw ValidationError("layer " + std::to_string(l) + " in the pruning order is not a hidden weighted layer");
    }
  }
  return config.given_order;
}

}  // namespace

std::vector<std::size_t> layer_visit_order(const Network& net) {
  auto order = net.hidden_layers();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto na = net.layer(a).output_nodes(), nb = net.layer(b).output_nodes();
    if (na != nb) return na > nb;
    return a > b;
  });
  return order;
}

PruneResult prune(const Network& net, const Dataset& target_set, const Dataset& gate_set, const PruneConfig& config) {
  if (!(config.target_fraction > 0.0 && config.target_fraction <= 1.0)) {
    throw ValidationError("target fraction must lie in (0, 1]");
  }
  if (gate_set.size() == 0) throw InsufficientSamplesError("pruning needs a non-empty gate set");

  PruneResult result{net, {}};
  auto& rep = result.report;
  rep.gate = config.gate;
  rep.target_fraction = config.target_fraction;
  rep.reference_accuracy = evaluate(net, target_set, Metric::accuracy);
  rep.target = config.target_fraction * rep.reference_accuracy;
  rep.visit_order = resolve_order(net, config);

  Network& current = result.network;
  double accuracy = evaluate(current, gate_set, Metric::accuracy);
  rep.accuracy_before = accuracy;
  for (auto layer : rep.visit_order) {
    const auto nodes = current.layer(layer).output_nodes();
    for (std::size_t i = nodes; i-- > 1;) {
      // `accuracy` always describes `current`, so measuring again is redundant.
      if (accuracy <= rep.target) break;
      rep.trace.push_back({layer, i, accuracy});
      current = remove_node(current, layer, i);
      accuracy = evaluate(current, gate_set, Metric::accuracy);
    }
  }
  rep.accuracy_after_pruning = accuracy;
  rep.accuracy_after_retraining = accuracy;
  rep.weights_before = count_weights(net);
  rep.weights_after = count_weights(current);
  rep.ratio = prune_ratio(rep.weights_before, rep.weights_after);
  rep.layers = summarize(net, current);
  return result;
}

PruneResult prune(const Network& net, const Dataset& validation, const PruneConfig& config) {
  return prune(net, validation, validation, config);
}

PruneResult prune_and_retrain(const Network& net, const Dataset& train_set, const Dataset& validation,
                              const PruneConfig& config, const TrainConfig& train_config) {
  const Dataset& gate = config.gate == GateSet::validation ? validation : train_set;
  auto result = prune(net, train_set, gate, config);
  if (config.retrain_epochs > 0) {
    TrainConfig tc = train_config;
    tc.epochs = config.retrain_epochs;
    train(result.network, train_set, &validation, tc);
    result.report.accuracy_after_retraining = evaluate(result.network, gate, Metric::accuracy);
  }
  return result;
}

std::string_view to_string(ImportanceMeasure m) {
  switch (m) {
    case ImportanceMeasure::node_index: return "node_index";
    case ImportanceMeasure::random: return "random";
    case ImportanceMeasure::l2_norm: return "l2";
    case ImportanceMeasure::l1_norm: return "l1";
    case ImportanceMeasure::correlation: return "correlation";
  }
  return "?";
}

ImportanceMeasure parse_importance(std::string_view text) {
  for (auto m : {ImportanceMeasure::node_index, ImportanceMeasure::random, ImportanceMeasure::l2_norm,
                 ImportanceMeasure::l1_norm, ImportanceMeasure::correlation}) {
    if (to_string(m) == text) return m;
  }
  throw ValidationError("unknown importance measure '" + std::string(text) + "'");
}

std::vector<double> importance_scores(const Network& net, std::size_t layer, ImportanceMeasure measure, Rng& rng) {
  const auto& l = weighted_layer(net, layer);
  const auto n = l.output_nodes();
  const auto width = l.weights.size() / n;
  std::vector<double> scores(n, 0.0);
  auto row = [&](std::size_t i) { return l.weights.data() + i * width; };
  switch (measure) {
    case ImportanceMeasure::node_index:
      for (std::size_t i = 0; i < n; ++i) scores[i] = static_cast<double>(i);
      break;
    case ImportanceMeasure::random: {
      const auto perm = rng.permutation(n);
      for (std::size_t k = 0; k < n; ++k) scores[perm[k]] = static_cast<double>(k);
      break;
    }
    case ImportanceMeasure::l2_norm:
    case ImportanceMeasure::l1_norm:
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          const double w = row(i)[j];
          acc += measure == ImportanceMeasure::l2_norm ? w * w : std::abs(w);
        }
        scores[i] = measure == ImportanceMeasure::l2_norm ? std::sqrt(acc) : acc;
      }
      break;
    case ImportanceMeasure::correlation: {
      std::vector<double> norms(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < width; ++j) acc += row(i)[j] * row(i)[j];
        norms[i] = std::sqrt(acc);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
          if (norms[i] == 0.0 || norms[k] == 0.0) continue;
          double dot = 0.0;
          for (std::size_t j = 0; j < width; ++j) dot += row(i)[j] * row(k)[j];
          const double c = std::min(1.0, std::abs(dot) / (norms[i] * norms[k]));
          scores[i] = std::max(scores[i], c);
          scores[k] = std::max(scores[k], c);
        }
      }
      break;
    }
  }
  return scores;
}

std::vector<std::size_t> removal_order(const Network& net, std::size_t layer, ImportanceMeasure measure, Rng& rng) {
  const auto scores = importance_scores(net, layer, measure, rng);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  switch (measure) {
    case ImportanceMeasure::node_index:
      std::reverse(order.begin(), order.end());
      break;
    case ImportanceMeasure::random:
    case ImportanceMeasure::l2_norm:
    case ImportanceMeasure::l1_norm:
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
      break;
    case ImportanceMeasure::correlation:
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
      break;
  }
  return order;
}

Network remove_nodes(const Network& net, std::size_t layer, std::vector<std::size_t> nodes) {
  std::sort(nodes.begin(), nodes.end(), std::greater<>());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw ValidationError("duplicate node in removal set for layer " + std::to_string(layer));
  }
  Network out = net;
  for (auto node : nodes) out = remove_node(out, layer, node);
  return out;
}

std::size_t removal_count(double fraction, std::size_t nodes) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValidationError("removal fraction must lie in [0, 1)");
  if (nodes == 0) return 0;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(nodes) + 1e-9));
  return std::min(k, nodes - 1);
}

std::vector<double> removal_curve(const Network& net, const Dataset& data, std::size_t layer,
                                  const std::vector<std::size_t>& order, const std::vector<double>& fractions) {
  const auto n = weighted_layer(net, layer).output_nodes();
  if (order.size() != n) {
    throw DimensionError("removal order has " + std::to_string(order.size()) + " entries for a " + std::to_string(n) +
                         "-node layer");
  }
  std::vector<double> acc;
  acc.reserve(fractions.size());
  for (double f : fractions) {
    const auto k = removal_count(f, n);
    const std::vector<std::size_t> drop(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    acc.push_back(evaluate(k == 0 ? net : remove_nodes(net, layer, drop), data, Metric::accuracy));
  }
  return acc;
}

void write_trace_csv(std::ostream& os, const PruneReport& report) {
  os << "step,layer,node,accuracy,target\n";
  for (std::size_t k = 0; k < report.trace.size(); ++k) {
    const auto& s = report.trace[k];
    csv_row(os, {std::to_string(k + 1), std::to_string(s.layer), std::to_string(s.node), csv_number(s.accuracy),
                 csv_number(report.target)});
  }
}

void write_prune_summary(std::ostream& os, const PruneReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-8s %8s %8s %10s %10s %8s\n", "layer", "kind", "before", "after",
                "w_before", "w_after", "ratio");
  os << line;
  for (const auto& s : report.layers) {
    std::snprintf(line, sizeof line, "%-6zu %-8s %8zu %8zu %10zu %10zu %7.2f%%\n", s.layer,
                  std::string(to_string(s.kind)).c_str(), s.nodes_before, s.nodes_after, s.weights_before,
                  s.weights_after, 100.0 * s.ratio());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-6s %-8s %8s %8s %10zu %10zu %7.2f%%\n", "total", "", "", "",
                report.weights_before, report.weights_after, 100.0 * report.ratio);
  os << line;
  std::snprintf(line, sizeof line,
                "gate=%s target=%.4f (%.2f x %.4f)\naccuracy before=%.4f after_pruning=%.4f after_retraining=%.4f\n",
                report.gate == GateSet::validation ? "validation" : "train", report.target, report.target_fraction,
                report.reference_accuracy, report.accuracy_before, report.accuracy_after_pruning,
                report.accuracy_after_retraining);
  os << line;
}

}  // namespace asymnet

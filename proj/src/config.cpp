#include "asymnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "asymnet/csv.hpp"
#include "asymnet/errors.hpp"

namespace asymnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t to_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

std::int64_t to_i64(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  return v;
}

double to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("expected a finite number, got '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename E, std::size_t N>
E to_enum(std::string_view s, const std::pair<E, std::string_view> (&names)[N]) {
  for (const auto& [e, name] : names)
    if (name == s) return e;
  std::string options;
  for (const auto& [e, name] : names) options += (options.empty() ? "" : ", ") + std::string(name);
  throw ConfigError("unknown value '" + std::string(s) + "' (expected one of: " + options + ")");
}

template <typename E, std::size_t N>
std::string from_enum(E v, const std::pair<E, std::string_view> (&names)[N]) {
  for (const auto& [e, name] : names)
    if (e == v) return std::string(name);
  return "?";
}

constexpr std::pair<ExperimentKind, std::string_view> kKinds[] = {
    {ExperimentKind::train, "train"},
    {ExperimentKind::prune, "prune"},
    {ExperimentKind::analyze_gaussian, "analyze-gaussian"},
    {ExperimentKind::analyze_sorting, "analyze-sorting"},
    {ExperimentKind::repeatability, "repeatability"}};
constexpr std::pair<DataSource, std::string_view> kSources[] = {
    {DataSource::gaussian, "gaussian"}, {DataSource::mnist, "mnist"}, {DataSource::cifar10, "cifar10"}, {DataSource::cache, "cache"}};
constexpr std::pair<ProfilePlan::Mode, std::string_view> kModes[] = {{ProfilePlan::Mode::none, "none"},
                                                                      {ProfilePlan::Mode::ones, "ones"},
                                                                      {ProfilePlan::Mode::schedule, "schedule"},
                                                                      {ProfilePlan::Mode::explicit_values, "explicit"}};
constexpr std::pair<OptimizerKind, std::string_view> kOptimizers[] = {{OptimizerKind::sgd, "sgd"},
                                                                       {OptimizerKind::adam, "adam"}};
constexpr std::pair<LossKind, std::string_view> kLosses[] = {{LossKind::mse, "mse"},
                                                              {LossKind::softmax_cross_entropy, "softmax_cross_entropy"}};
constexpr std::pair<LayerOrder, std::string_view> kOrders[] = {{LayerOrder::by_node_count_desc, "by_node_count_desc"},
                                                                {LayerOrder::given, "given"}};
constexpr std::pair<WeightView, std::string_view> kViews[] = {{WeightView::raw, "raw"},
                                                              {WeightView::effective, "effective"}};
constexpr std::pair<GateSet, std::string_view> kGates[] = {{GateSet::validation, "validation"}, {GateSet::train, "train"}};

std::string from_double(double v) { return csv_number(v); }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + fmt(items[i]);
  return out;
}

std::filesystem::path to_path(std::string_view s, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(s)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, const std::filesystem::path&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string_view section;
  std::string_view key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using P = std::filesystem::path;
  static const std::vector<Field> table = {
      {"experiment", "kind", [](C& c, auto v, const P&) { c.kind = to_enum(v, kKinds); },
       [](const C& c) { return from_enum(c.kind, kKinds); }},
      {"experiment", "seed", [](C& c, auto v, const P&) { c.seed = to_u64(v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"experiment", "output", [](C& c, auto v, const P& b) { c.output = to_path(v, b); },
       [](const C& c) { return c.output.string(); }},

      {"dataset", "source", [](C& c, auto v, const P&) { c.dataset.source = to_enum(v, kSources); },
       [](const C& c) { return from_enum(c.dataset.source, kSources); }},
      {"dataset", "images", [](C& c, auto v, const P& b) { c.dataset.images = to_path(v, b); },
       [](const C& c) { return c.dataset.images.string(); }},
      {"dataset", "labels", [](C& c, auto v, const P& b) { c.dataset.labels = to_path(v, b); },
       [](const C& c) { return c.dataset.labels.string(); }},
      {"dataset", "batches",
       [](C& c, auto v, const P& b) {
         c.dataset.batches.clear();
         for (auto item : split_list(v)) c.dataset.batches.push_back(to_path(item, b));
       },
       [](const C& c) { return join(c.dataset.batches, [](const P& p) { return p.string(); }); }},
      {"dataset", "cache", [](C& c, auto v, const P& b) { c.dataset.cache = to_path(v, b); },
       [](const C& c) { return c.dataset.cache.string(); }},
      {"dataset", "samples", [](C& c, auto v, const P&) { c.dataset.samples = to_u64(v); },
       [](const C& c) { return std::to_string(c.dataset.samples); }},
      {"dataset", "validation_fraction", [](C& c, auto v, const P&) { c.dataset.validation_fraction = to_double(v); },
       [](const C& c) { return from_double(c.dataset.validation_fraction); }},
      {"dataset", "autoassociative", [](C& c, auto v, const P&) { c.dataset.autoassociative = to_bool(v); },
       [](const C& c) { return from_bool(c.dataset.autoassociative); }},
      {"dataset", "flatten", [](C& c, auto v, const P&) { c.dataset.flatten = to_bool(v); },
       [](const C& c) { return from_bool(c.dataset.flatten); }},

      {"network", "layers", [](C& c, auto v, const P&) { c.network.layers = parse_layers(v); },
       [](const C& c) { return format_layers(c.network.layers); }},
      {"network", "base", [](C& c, auto v, const P&) { c.network.base = parse_activation(v); },
       [](const C& c) { return std::string(to_string(c.network.base)); }},
      {"network", "head", [](C& c, auto v, const P&) { c.network.head = parse_activation(v); },
       [](const C& c) { return std::string(to_string(c.network.head)); }},
      {"network", "shallow", [](C& c, auto v, const P&) { c.network.shallow = to_bool(v); },
       [](const C& c) { return from_bool(c.network.shallow); }},
      {"network", "tied", [](C& c, auto v, const P&) { c.network.tied = to_bool(v); },
       [](const C& c) { return from_bool(c.network.tied); }},

      {"profile", "mode", [](C& c, auto v, const P&) { c.profile.mode = to_enum(v, kModes); },
       [](const C& c) { return from_enum(c.profile.mode, kModes); }},
      {"profile", "schedule", [](C& c, auto v, const P&) { c.profile.schedule = parse_schedule(v); },
       [](const C& c) { return std::string(to_string(c.profile.schedule)); }},
      {"profile", "floor", [](C& c, auto v, const P&) { c.profile.floor = to_double(v); },
       [](const C& c) { return from_double(c.profile.floor); }},
      {"profile", "values",
       [](C& c, auto v, const P&) {
         c.profile.values.clear();
         for (auto item : split_list(v)) c.profile.values.push_back(to_double(item));
       },
       [](const C& c) { return join(c.profile.values, from_double); }},

      {"training", "optimizer", [](C& c, auto v, const P&) { c.training.optimizer.kind = to_enum(v, kOptimizers); },
       [](const C& c) { return from_enum(c.training.optimizer.kind, kOptimizers); }},
      {"training", "learning_rate", [](C& c, auto v, const P&) { c.training.optimizer.learning_rate = to_double(v); },
       [](const C& c) { return from_double(c.training.optimizer.learning_rate); }},
      {"training", "decay", [](C& c, auto v, const P&) { c.training.optimizer.decay = to_double(v); },
       [](const C& c) { return from_double(c.training.optimizer.decay); }},
      {"training", "epochs", [](C& c, auto v, const P&) { c.training.epochs = to_u64(v); },
       [](const C& c) { return std::to_string(c.training.epochs); }},
      {"training", "batch_size", [](C& c, auto v, const P&) { c.training.batch_size = to_u64(v); },
       [](const C& c) { return std::to_string(c.training.batch_size); }},
      {"training", "loss", [](C& c, auto v, const P&) { c.training.loss = to_enum(v, kLosses); },
       [](const C& c) { return from_enum(c.training.loss, kLosses); }},
      {"training", "compensate", [](C& c, auto v, const P&) { c.training.compensate = to_bool(v); },
       [](const C& c) { return from_bool(c.training.compensate); }},

      {"prune", "target_fraction", [](C& c, auto v, const P&) { c.prune.target_fraction = to_double(v); },
       [](const C& c) { return from_double(c.prune.target_fraction); }},
      {"prune", "layer_order", [](C& c, auto v, const P&) { c.prune.layer_order = to_enum(v, kOrders); },
       [](const C& c) { return from_enum(c.prune.layer_order, kOrders); }},
      {"prune", "given_order",
       [](C& c, auto v, const P&) {
         c.prune.given_order.clear();
         for (auto item : split_list(v)) c.prune.given_order.push_back(to_u64(item));
       },
       [](const C& c) { return join(c.prune.given_order, [](std::size_t i) { return std::to_string(i); }); }},
      {"prune", "retrain_epochs", [](C& c, auto v, const P&) { c.prune.retrain_epochs = to_u64(v); },
       [](const C& c) { return std::to_string(c.prune.retrain_epochs); }},
      {"prune", "gate", [](C& c, auto v, const P&) { c.prune.gate = to_enum(v, kGates); },
       [](const C& c) { return from_enum(c.prune.gate, kGates); }},

      {"analysis", "iterations", [](C& c, auto v, const P&) { c.analysis.iterations = to_u64(v); },
       [](const C& c) { return std::to_string(c.analysis.iterations); }},
      {"analysis", "fit_rate", [](C& c, auto v, const P&) { c.analysis.fit_rate = to_double(v); },
       [](const C& c) { return from_double(c.analysis.fit_rate); }},
      {"analysis", "stages", [](C& c, auto v, const P&) { c.analysis.stages = to_u64(v); },
       [](const C& c) { return std::to_string(c.analysis.stages); }},
      {"analysis", "epsilon", [](C& c, auto v, const P&) { c.analysis.epsilon = to_double(v); },
       [](const C& c) { return from_double(c.analysis.epsilon); }},
      {"analysis", "fractions",
       [](C& c, auto v, const P&) {
         c.analysis.fractions.clear();
         for (auto item : split_list(v)) c.analysis.fractions.push_back(to_double(item));
       },
       [](const C& c) { return join(c.analysis.fractions, from_double); }},
      {"analysis", "measures",
       [](C& c, auto v, const P&) {
         c.analysis.measures.clear();
         for (auto item : split_list(v)) {
           try {
             c.analysis.measures.push_back(parse_importance(item));
           } catch (const ValidationError& e) {
             throw ConfigError(e.what());
           }
         }
       },
       [](const C& c) {
         return join(c.analysis.measures, [](ImportanceMeasure m) { return std::string(to_string(m)); });
       }},
      {"analysis", "layer", [](C& c, auto v, const P&) { c.analysis.layer = to_i64(v); },
       [](const C& c) { return std::to_string(c.analysis.layer); }},
      {"analysis", "samples", [](C& c, auto v, const P&) { c.analysis.samples = to_u64(v); },
       [](const C& c) { return std::to_string(c.analysis.samples); }},
      {"analysis", "mu", [](C& c, auto v, const P&) { c.analysis.mu = to_double(v); },
       [](const C& c) { return from_double(c.analysis.mu); }},
      {"analysis", "node_counts",
       [](C& c, auto v, const P&) {
         c.analysis.node_counts.clear();
         for (auto item : split_list(v)) c.analysis.node_counts.push_back(to_u64(item));
       },
       [](const C& c) { return join(c.analysis.node_counts, [](std::size_t i) { return std::to_string(i); }); }},
      {"analysis", "runs", [](C& c, auto v, const P&) { c.analysis.runs = to_u64(v); },
       [](const C& c) { return std::to_string(c.analysis.runs); }},
      {"analysis", "same_data", [](C& c, auto v, const P&) { c.analysis.same_data = to_bool(v); },
       [](const C& c) { return from_bool(c.analysis.same_data); }},
      {"analysis", "weights", [](C& c, auto v, const P&) { c.analysis.weights = to_enum(v, kViews); },
       [](const C& c) { return from_enum(c.analysis.weights, kViews); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  for (const auto& [e, name] : kKinds)
    if (e == k) return name;
  return "?";
}

std::string_view to_string(DataSource s) {
  for (const auto& [e, name] : kSources)
    if (e == s) return name;
  return "?";
}

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  for (auto item : split_list(text)) {
    const auto parts = split_list(item, ':');
    LayerSpec spec;
    const auto kind = parts.empty() ? std::string_view{} : parts[0];
    auto bad = [&] { return ConfigError("malformed layer '" + std::string(item) + "'"); };
    if (kind == "dense") {
      if (parts.size() != 2) throw bad();
      spec.kind = LayerKind::dense;
      spec.width = to_u64(parts[1]);
    } else if (kind == "conv") {
      if (parts.size() != 3 && parts.size() != 4) throw bad();
      spec.kind = LayerKind::conv2d;
      spec.width = to_u64(parts[1]);
      spec.kernel = to_u64(parts[2]);
      if (parts.size() == 4) {
        if (parts[3] == "same") spec.padding = Padding::same;
        else if (parts[3] != "valid") throw bad();
      }
    } else if (kind == "pool") {
      if (parts.size() != 1) throw bad();
      spec.kind = LayerKind::maxpool;
    } else if (kind == "flatten") {
      if (parts.size() != 1) throw bad();
      spec.kind = LayerKind::flatten;
    } else {
      throw bad();
    }
    if ((spec.kind == LayerKind::dense || spec.kind == LayerKind::conv2d) && spec.width == 0) throw bad();
    if (spec.kind == LayerKind::conv2d && spec.kernel == 0) throw bad();
    out.push_back(spec);
  }
  return out;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
  return join(layers, [](const LayerSpec& s) -> std::string {
    switch (s.kind) {
      case LayerKind::dense: return "dense:" + std::to_string(s.width);
      case LayerKind::conv2d:
        return "conv:" + std::to_string(s.width) + ":" + std::to_string(s.kernel) + ":" +
               (s.padding == Padding::same ? "same" : "valid");
      case LayerKind::maxpool: return "pool";
      case LayerKind::flatten: return "flatten";
    }
    return "?";
  });
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen_sections;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no) + ": ";
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == section; });
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      if (!seen_sections.insert(section).second) throw ConfigError(where + "section [" + section + "] repeated");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = std::find_if(fields().begin(), fields().end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == fields().end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert({section, key}).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->set(config, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto config = parse_config(ss.str(), path.parent_path());
  validate_config(config);
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string_view section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + std::string(section) + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  const auto& d = c.dataset;
  switch (d.source) {
    case DataSource::gaussian:
      if (d.samples < 2) fail("gaussian data needs samples >= 2");
      break;
    case DataSource::mnist:
      if (d.images.empty() || d.labels.empty()) fail("mnist data needs images and labels paths");
      break;
    case DataSource::cifar10:
      if (d.batches.empty()) fail("cifar10 data needs at least one batch path");
      break;
    case DataSource::cache:
      if (d.cache.empty()) fail("cached data needs a cache path");
      break;
  }
  if (!(d.validation_fraction >= 0.0 && d.validation_fraction < 1.0)) fail("validation_fraction must lie in [0, 1)");

  const auto& n = c.network;
  if (n.layers.empty()) fail("network.layers is empty");
  if (n.shallow) {
    if (d.source != DataSource::gaussian) fail("shallow models are fitted on gaussian data only");
    if (n.layers.size() != 1 || n.layers[0].kind != LayerKind::dense) fail("a shallow model is a single dense:P layer");
    if (n.base != Activation::linear && n.base != Activation::relu) fail("shallow models use a linear or relu base");
  } else {
    if (n.layers.back().kind != LayerKind::dense) fail("the last layer must be dense");
  }
  if (c.profile.mode == ProfilePlan::Mode::explicit_values && c.profile.values.empty()) {
    fail("profile.mode = explicit needs profile.values");
  }
  if (c.profile.mode == ProfilePlan::Mode::schedule && c.profile.schedule == Schedule::explicit_values) {
    fail("profile.schedule cannot be explicit; use mode = explicit");
  }
  if (!(c.profile.floor > 0.0 && c.profile.floor < 1.0)) fail("profile.floor must lie in (0, 1)");

  const auto& t = c.training;
  if (t.epochs == 0) fail("training.epochs must be at least 1");
  if (t.batch_size == 0) fail("training.batch_size must be at least 1");
  if (!(t.optimizer.learning_rate > 0.0)) fail("training.learning_rate must be positive");
  if (t.optimizer.decay < 0.0) fail("training.decay must be non-negative");
  if (t.compensate && (c.profile.mode == ProfilePlan::Mode::none)) fail("training.compensate needs profiles");

  if (!(c.prune.target_fraction > 0.0 && c.prune.target_fraction <= 1.0)) fail("prune.target_fraction must lie in (0, 1]");
  if (c.prune.layer_order == LayerOrder::given && c.prune.given_order.empty()) fail("prune.given_order is empty");

  const auto& a = c.analysis;
  for (double f : a.fractions)
    if (!(f >= 0.0 && f < 1.0)) fail("analysis.fractions must lie in [0, 1)");
  if (a.runs < 2 && c.kind == ExperimentKind::repeatability) fail("analysis.runs must be at least 2");
  if (!(a.epsilon > 0.0 && a.epsilon <= 1.0)) fail("analysis.epsilon must lie in (0, 1]");
  if (a.mu < 0.0) fail("analysis.mu must be non-negative");
  if (!(a.fit_rate > 0.0)) fail("analysis.fit_rate must be positive");
}

std::uint64_t derive_seed(const ExperimentConfig& config, SeedStream stream) {
  return Rng::derive(config.seed, static_cast<std::uint64_t>(stream));
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace asymnet

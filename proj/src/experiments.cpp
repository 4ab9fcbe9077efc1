#include "asymnet/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "asymnet/csv.hpp"
#include "asymnet/errors.hpp"
#include "asymnet/model_io.hpp"

namespace asymnet {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

bool autoassociative_net(const Network& net) {
  return shape_size(net.output_shape()) == shape_size(net.input_shape());
}

void check_fits(const Network& net, const Dataset& data) {
  if (data.sample_shape() != net.input_shape()) {
    throw ConfigError("model input " + shape_string(net.input_shape()) + " does not match data samples " +
                      shape_string(data.sample_shape()));
  }
}

std::size_t curve_layer(const ExperimentConfig& config, const Network& net) {
  const auto hidden = net.hidden_layers();
  if (hidden.empty()) throw ConfigError("the model has no hidden weighted layer to analyze");
  if (config.analysis.layer < 0) return hidden.front();
  const auto l = static_cast<std::size_t>(config.analysis.layer);
  if (std::find(hidden.begin(), hidden.end(), l) == hidden.end()) {
    throw ConfigError("analysis.layer " + std::to_string(l) + " is not a hidden weighted layer");
  }
  return l;
}

}  // namespace

Dataset load_source(const ExperimentConfig& config) {
  const auto& spec = config.dataset;
  Dataset d;
  switch (spec.source) {
    case DataSource::gaussian:
      d = gaussian_correlated(spec.samples, reference_gaussian_covariance(), derive_seed(config, SeedStream::data));
      break;
    case DataSource::mnist:
      d = load_mnist_idx(spec.images, spec.labels);
      break;
    case DataSource::cifar10:
      d = load_cifar10_bin(spec.batches);
      break;
    case DataSource::cache:
      d = load_dataset(spec.cache);
      break;
  }
  if (spec.source != DataSource::gaussian && spec.samples > 0) {
    if (spec.samples > d.size()) {
      throw ConfigError("dataset.samples = " + std::to_string(spec.samples) + " exceeds the " +
                        std::to_string(d.size()) + " available");
    }
    d = subset(d, spec.samples, derive_seed(config, SeedStream::data));
  }
  if (spec.autoassociative) {
    d = autoassociative(d);
  } else if (spec.flatten) {
    d = flattened(d);
  }
  return d;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  Dataset all = load_source(config);
  const double v = config.dataset.validation_fraction;
  if (v == 0.0) return {std::move(all), Dataset{}};
  auto parts = split(all, {1.0 - v, v}, derive_seed(config, SeedStream::split));
  return {std::move(parts[0]), std::move(parts[1])};
}

Network build_from_config(const ExperimentConfig& config, const Shape& input_shape) {
  Rng rng(derive_seed(config, SeedStream::init));
  return build_network(input_shape, config.network.layers, config.network.base, config.network.head, config.profile,
                       rng);
}

TrainConfig train_config(const ExperimentConfig& config) {
  TrainConfig tc;
  tc.epochs = config.training.epochs;
  tc.batch_size = config.training.batch_size;
  tc.optimizer = config.training.optimizer;
  tc.loss = config.training.loss;
  tc.seed = derive_seed(config, SeedStream::train);
  tc.compensate = config.training.compensate;
  return tc;
}

ExperimentConfig symmetric_twin(const ExperimentConfig& config) {
  ExperimentConfig twin = config;
  twin.profile.mode = ProfilePlan::Mode::ones;
  twin.profile.values.clear();
  twin.training.compensate = false;
  return twin;
}

ExperimentConfig with_seed(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig c = config;
  c.seed = seed;
  return c;
}

TrainOutcome train_network(const ExperimentConfig& config, const PreparedData& data, const EpochCallback& on_epoch) {
  TrainOutcome out{build_from_config(config, data.train.sample_shape()), {}};
  const Dataset* val = data.validation.size() > 0 ? &data.validation : nullptr;
  out.records = train(out.network, data.train, val, train_config(config), on_epoch);
  return out;
}

ShallowModel shallow_from_config(const ExperimentConfig& config, std::size_t inputs) {
  const auto hidden = config.network.layers.at(0).width;
  auto profile = plan_profile(config.profile, hidden);
  if (!profile) profile = explicit_profile(std::vector<double>(hidden, 1.0));
  Rng rng(derive_seed(config, SeedStream::init));
  return make_shallow(inputs, hidden, inputs, std::move(*profile), config.network.base, config.network.tied, rng);
}

FitResult fit_from_config(const ExperimentConfig& config, const Dataset& data) {
  if (data.inputs.rank() != 2) throw ConfigError("shallow models need flat samples");
  ShallowModel model = shallow_from_config(config, data.inputs.extent(1));
  FitOptions opts;
  opts.iterations = config.analysis.iterations;
  opts.learning_rate = config.analysis.fit_rate;
  if (config.analysis.stages > 0) {
    const auto stages = staged_schedule(model.hidden(), config.analysis.stages, config.analysis.epsilon);
    return staged_fit(std::move(model), data, stages, opts);
  }
  return fit_shallow(std::move(model), data, opts);
}

Network shallow_to_network(const ShallowModel& model) {
  Layer enc = dense_layer(model.inputs(), model.hidden(), model.base, model.profile);
  enc.weights = model.w1;
  Layer dec = dense_layer(model.hidden(), model.outputs(), Activation::linear);
  dec.weights = model.decoder();
  return Network({model.inputs()}, {std::move(enc), std::move(dec)});
}

void write_manifest(const std::filesystem::path& path, std::string_view command, const ExperimentConfig& config) {
  auto out = open_out(path);
  out << "command = " << command << '\n'
      << "asymnet_version = " << kVersion << '\n'
      << "model_format_version = " << kModelFormatVersion << '\n'
      << "config_hash = " << config_hash(config) << '\n'
      << "seed = " << config.seed << "\n\n"
      << serialize_config(config);
}

RunResult cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const EpochCallback& on_epoch) {
  validate_config(config);
  RunResult r{ensure_dir(out_dir), {}, {}};
  const auto model_path = out_dir / "model.asym";
  std::ostringstream summary;
  if (config.network.shallow) {
    const PreparedData data = prepare_data(config);
    const auto fit = fit_from_config(config, data.train);
    save_model(shallow_to_network(fit.model), model_path);
    auto csv = open_out(out_dir / "fit.csv");
    csv << "iterations,loss,converged\n";
    csv_row(csv, {std::to_string(fit.iterations), csv_number(fit.loss), fit.converged ? "1" : "0"});
    r.files.push_back(out_dir / "fit.csv");
    summary << "shallow fit: " << fit.iterations << " iterations, loss " << fit.loss << '\n';
  } else {
    const PreparedData data = prepare_data(config);
    const auto outcome = train_network(config, data, on_epoch);
    save_model(outcome.network, model_path);
    auto csv = open_out(out_dir / "train.csv");
    write_train_csv(csv, outcome.records);
    r.files.push_back(out_dir / "train.csv");
    const auto& last = outcome.records.back();
    summary << "trained " << last.epoch << " epochs: train_loss " << last.train_loss << ", val_loss " << last.val_loss
            << ", val_accuracy " << last.val_accuracy << '\n';
  }
  r.files.push_back(model_path);
  write_manifest(out_dir / "manifest.txt", "train", config);
  r.files.push_back(out_dir / "manifest.txt");
  r.summary = summary.str();
  return r;
}

RunResult cmd_prune(const ExperimentConfig& config, const std::filesystem::path& model_path,
                    const std::filesystem::path& out_dir) {
  validate_config(config);
  const Network net = load_model(model_path);
  const PreparedData data = prepare_data(config);
  check_fits(net, data.train);
  if (data.validation.size() == 0 && config.prune.gate == GateSet::validation) {
    throw ConfigError("pruning with a validation gate needs dataset.validation_fraction > 0");
  }
  RunResult r{ensure_dir(out_dir), {}, {}};
  const auto result = prune_and_retrain(net, data.train, data.validation.size() ? data.validation : data.train,
                                        config.prune, train_config(config));
  save_model(result.network, out_dir / "pruned.asym");
  {
    auto csv = open_out(out_dir / "trace.csv");
    write_trace_csv(csv, result.report);
  }
  std::ostringstream summary;
  write_prune_summary(summary, result.report);
  open_out(out_dir / "summary.txt") << summary.str();
  write_manifest(out_dir / "manifest.txt", "prune", config);
  r.files = {out_dir / "pruned.asym", out_dir / "trace.csv", out_dir / "summary.txt", out_dir / "manifest.txt"};
  r.summary = summary.str();
  return r;
}

namespace {

void analyze_gaussian(const ExperimentConfig& config, const std::filesystem::path& model_path,
                      const std::filesystem::path& out_dir, RunResult& r) {
  Network net;
  if (!model_path.empty()) {
    net = load_model(model_path);
  } else {
    const PreparedData data = prepare_data(config);
    net = shallow_to_network(fit_from_config(config, data.train).model);
  }
  const auto report = align_report(net, net.weighted_layers().front(), reference_gaussian_covariance());
  {
    auto csv = open_out(out_dir / "alignment.csv");
    write_alignment_csv(csv, report);
  }
  {
    auto txt = open_out(out_dir / "alignment.txt");
    write_alignment_matrix(txt, report);
  }
  r.files.push_back(out_dir / "alignment.csv");
  r.files.push_back(out_dir / "alignment.txt");
  std::ostringstream s;
  for (std::size_t i = 0; i < report.best.size(); ++i) {
    s << "node " << i + 1 << ": best u" << report.best[i] + 1 << " |cos| "
      << report.cosine(i, report.best[i]) << '\n';
  }
  r.summary = s.str();
}

void analyze_repeatability(const ExperimentConfig& config, const std::filesystem::path& out_dir, RunResult& r) {
  const PreparedData base = prepare_data(config);
  auto replicas = [&](const ExperimentConfig& cfg) {
    std::vector<Network> nets;
    for (std::size_t run = 0; run < config.analysis.runs; ++run) {
      const auto replica = with_seed(cfg, Rng::derive(cfg.seed, 1000 + run));
      nets.push_back(train_network(replica, config.analysis.same_data ? base : prepare_data(replica)).network);
    }
    return nets;
  };
  const auto asym_nets = replicas(config);
  const auto sym_nets = replicas(symmetric_twin(config));
  const auto view = config.analysis.weights;
  const auto other = view == WeightView::raw ? WeightView::effective : WeightView::raw;
  const auto asym = pairwise_weight_mse(asym_nets, view), sym = pairwise_weight_mse(sym_nets, view);
  const auto asym_alt = pairwise_weight_mse(asym_nets, other), sym_alt = pairwise_weight_mse(sym_nets, other);
  const std::string alt = view == WeightView::raw ? "effective" : "raw";
  auto csv = open_out(out_dir / "repeatability.csv");
  csv << "layer,asymmetric,symmetric,asymmetric_" << alt << ",symmetric_" << alt << '\n';
  std::ostringstream s;
  for (std::size_t k = 0; k < asym.size(); ++k) {
    csv_row(csv, {std::to_string(k + 1), csv_number(asym[k]), csv_number(sym[k]), csv_number(asym_alt[k]),
                  csv_number(sym_alt[k])});
    s << "layer " << k + 1 << ": asymmetric " << asym[k] << ", symmetric " << sym[k] << " (" << alt
      << ": " << asym_alt[k] << ", " << sym_alt[k] << ")\n";
  }
  r.files.push_back(out_dir / "repeatability.csv");
  r.summary = s.str();
}

void analyze_sorting(const ExperimentConfig& config, const std::filesystem::path& model_path,
                     const std::filesystem::path& out_dir, RunResult& r) {
  if (model_path.empty()) throw ConfigError("sorting analysis needs --model");
  const Network net = load_model(model_path);
  const PreparedData data = prepare_data(config);
  const Dataset& eval = data.validation.size() ? data.validation : data.train;
  check_fits(net, eval);
  const bool auto_assoc = autoassociative_net(net);
  std::ostringstream s;

  {
    CorrelationOptions opts;
    opts.loss = auto_assoc ? Metric::mse : Metric::cross_entropy;
    auto csv = open_out(out_dir / "removal_correlation.csv");
    csv << "layer,nodes,correlation\n";
    for (auto l : net.hidden_layers()) {
      double c = std::numeric_limits<double>::quiet_NaN();
      try {
        c = importance_correlation(net, l, eval, opts);
      } catch (const ValidationError&) {
        // A layer whose removals all cost the same has no defined correlation.
      }
      csv_row(csv, {std::to_string(l), std::to_string(net.layer(l).output_nodes()), csv_number(c)});
      s << "layer " << l << " removal-loss correlation " << c << '\n';
    }
    r.files.push_back(out_dir / "removal_correlation.csv");
  }

  const auto layer = curve_layer(config, net);
  if (!auto_assoc) {
    auto csv = open_out(out_dir / "removal_curves.csv");
    csv << "measure,fraction,accuracy\n";
    Rng rng(derive_seed(config, SeedStream::analysis));
    for (auto m : config.analysis.measures) {
      const auto order = removal_order(net, layer, m, rng);
      const auto acc = removal_curve(net, eval, layer, order, config.analysis.fractions);
      for (std::size_t k = 0; k < acc.size(); ++k) {
        csv_row(csv, {std::string(to_string(m)), csv_number(config.analysis.fractions[k]), csv_number(acc[k])});
      }
    }
    r.files.push_back(out_dir / "removal_curves.csv");
  } else {
    const auto first = net.weighted_layers().front();
    if (net.layer(first).kind == LayerKind::dense && first + 1 < net.size() &&
        net.layer(first + 1).kind == LayerKind::dense) {
      SparseOptions so;
      so.mu = config.analysis.mu;
      const auto z = mean_abs_code(net, first, eval,
                                   std::min(config.analysis.samples, eval.size()), so);
      auto csv = open_out(out_dir / "sparse_code.csv");
      csv << "node,mean_abs_z\n";
      for (std::size_t i = 0; i < z.size(); ++i) csv_row(csv, {std::to_string(i + 1), csv_number(z[i])});
      double c = std::numeric_limits<double>::quiet_NaN();
      try {
        c = index_correlation(z);
      } catch (const ValidationError&) {
      }
      s << "sparse-code correlation " << c << '\n';
      r.files.push_back(out_dir / "sparse_code.csv");
    }
    if (!config.analysis.node_counts.empty()) {
      Rng rng(derive_seed(config, SeedStream::analysis));
      const auto first_p = reconstruction_curve(net, layer, eval, config.analysis.node_counts, NodeSelection::first_p, rng);
      const auto random_p = reconstruction_curve(net, layer, eval, config.analysis.node_counts, NodeSelection::random_p, rng);
      auto csv = open_out(out_dir / "reconstruction.csv");
      csv << "p,first_p,random_p\n";
      for (std::size_t k = 0; k < first_p.size(); ++k) {
        csv_row(csv, {std::to_string(config.analysis.node_counts[k]), csv_number(first_p[k]), csv_number(random_p[k])});
      }
      r.files.push_back(out_dir / "reconstruction.csv");
    }
  }
  r.summary = s.str();
}

}  // namespace

RunResult cmd_analyze(const ExperimentConfig& config, const std::filesystem::path& model_path,
                      const std::filesystem::path& out_dir) {
  validate_config(config);
  RunResult r{ensure_dir(out_dir), {}, {}};
  switch (config.kind) {
    case ExperimentKind::analyze_gaussian:
      analyze_gaussian(config, model_path, out_dir, r);
      break;
    case ExperimentKind::repeatability:
      analyze_repeatability(config, out_dir, r);
      break;
    default:
      analyze_sorting(config, model_path, out_dir, r);
      break;
  }
  write_manifest(out_dir / "manifest.txt", "analyze", config);
  r.files.push_back(out_dir / "manifest.txt");
  return r;
}

}  // namespace asymnet

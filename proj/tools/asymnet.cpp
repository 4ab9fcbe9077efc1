// Command-line driver: asymnet train|prune|analyze --config <path> [--model <path>] [--out <dir>] [--seed <u64>]

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "asymnet/errors.hpp"
#include "asymnet/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kUserError = 1, kInternalError = 2 };

struct Options {
  std::string config;
  std::string model;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App& cmd, Options& o, bool needs_model) {
  cmd.add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  auto* model = cmd.add_option("--model", o.model, "Model file produced by 'train'");
  if (needs_model) model->required();
  cmd.add_option("--out", o.out, "Output directory (default: the config's experiment.output)");
  cmd.add_option("--seed", o.seed, "Override the master seed");
  cmd.add_flag("-q,--quiet", o.quiet, "Only print errors");
}

asymnet::ExperimentConfig resolve(const Options& o, std::filesystem::path& out_dir) {
  auto config = asymnet::load_config(o.config);
  if (o.seed) config.seed = *o.seed;
  out_dir = o.out.empty() ? config.output : std::filesystem::path(o.out);
  return config;
}

void report(const asymnet::RunResult& r, bool quiet) {
  if (quiet) return;
  std::cout << r.summary;
  for (const auto& f : r.files) std::cout << "wrote " << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric network training, pruning and analysis"};
  app.require_subcommand(1);
  Options opts;
  auto* train = app.add_subcommand("train", "Train a network and save it");
  add_common(*train, opts, false);
  auto* prune = app.add_subcommand("prune", "Prune a trained network and retrain it");
  add_common(*prune, opts, true);
  auto* analyze = app.add_subcommand("analyze", "Run the analysis selected by experiment.kind");
  add_common(*analyze, opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  try {
    std::filesystem::path out_dir;
    const auto config = resolve(opts, out_dir);
    if (train->parsed()) {
      auto progress = [&](const asymnet::EpochRecord& r) {
        if (!opts.quiet) {
          std::cout << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss
                    << " val_accuracy " << r.val_accuracy << " (" << r.seconds << " s)\n";
        }
      };
      report(asymnet::cmd_train(config, out_dir, progress), opts.quiet);
    } else if (prune->parsed()) {
      report(asymnet::cmd_prune(config, opts.model, out_dir), opts.quiet);
    } else {
      report(asymnet::cmd_analyze(config, opts.model, out_dir), opts.quiet);
    }
    return kOk;
  } catch (const asymnet::StateError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const asymnet::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

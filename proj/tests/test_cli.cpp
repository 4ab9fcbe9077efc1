#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "asymnet/errors.hpp"
#include "asymnet/experiments.hpp"
#include "asymnet/model_io.hpp"

using namespace asymnet;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = ASYMNET_CONFIG_DIR;
const fs::path kData = ASYMNET_DATA_DIR;

fs::path workdir(const std::string& name) {
  auto d = fs::temp_directory_path() / "asymnet_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string small_classifier(const std::string& profile_mode, bool compensate = false) {
  return "[experiment]\nkind = train\nseed = 5\n"
         "[dataset]\nsource = mnist\nimages = " +
         (kData / "mnist10k-images-idx3-ubyte.gz").string() + "\nlabels = " +
         (kData / "mnist10k-labels-idx1-ubyte.gz").string() +
         "\nsamples = 600\nvalidation_fraction = 0.25\nflatten = true\n"
         "[network]\nlayers = dense:12, dense:10\nbase = relu\nhead = linear\n"
         "[profile]\nmode = " +
         profile_mode +
         "\n"
         "[training]\noptimizer = adam\nlearning_rate = 0.003\nepochs = 2\nbatch_size = 32\ncompensate = " +
         (compensate ? "true" : "false") +
         "\n"
         "[prune]\ntarget_fraction = 0.9\nretrain_epochs = 1\n"
         "[analysis]\nfractions = 0, 0.5\nmeasures = node_index, random\n";
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("bundled configs load and round-trip") {
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(kConfigs)) {
      if (e.path().extension() != ".cfg") continue;
      ++count;
      CAPTURE(e.path().string());
      const auto c = load_config(e.path());
      CHECK(parse_config(serialize_config(c)) == c);
      CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
      CHECK(config_hash(c).size() == 16);
    }
    CHECK(count >= 3);
  }
  SUBCASE("relative paths resolve against the config directory") {
    auto c = parse_config("[dataset]\nsource = mnist\nimages = ../data/x.gz\n", "/a/configs");
    CHECK(c.dataset.images == fs::path("/a/data/x.gz"));
  }
  SUBCASE("errors carry line numbers") {
    auto err = [](const std::string& text) {
      try {
        parse_config(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(err("[experiment]\nseed = 1\nbogus = 2\n").find("line 3") != std::string::npos);
    CHECK(err("[nowhere]\n").find("unknown section") != std::string::npos);
    CHECK(err("[experiment]\nseed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
    CHECK(err("seed = 1\n").find("outside") != std::string::npos);
    CHECK(err("[experiment]\nseed = -4\n").find("line 2") != std::string::npos);
    CHECK(err("[training]\noptimizer = rmsprop\n").find("rmsprop") != std::string::npos);
    CHECK(err("[network]\nlayers = dense:4, conv:3\n") != "no error");
    CHECK(err("[experiment]\nkind = analyze-gaussian\n# comment\n\n") == "no error");
  }
  SUBCASE("layer syntax") {
    const auto layers = parse_layers("conv:6:5, pool, conv:8:3:same, flatten, dense:10");
    REQUIRE(layers.size() == 5);
    CHECK(layers[0] == LayerSpec{LayerKind::conv2d, 6, 5, Padding::valid});
    CHECK(layers[2].padding == Padding::same);
    CHECK(parse_layers(format_layers(layers)) == layers);
  }
  SUBCASE("validation") {
    auto c = parse_config(small_classifier("schedule"));
    validate_config(c);
    auto bad = c;
    bad.training.epochs = 0;
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
    bad = c;
    bad.profile.mode = ProfilePlan::Mode::none;
    bad.training.compensate = true;
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
    bad = c;
    bad.dataset.validation_fraction = 1.0;
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
    bad = c;
    bad.network.layers.back().kind = LayerKind::conv2d;
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
  }
  SUBCASE("seed streams are distinct and stable") {
    ExperimentConfig c;
    c.seed = 42;
    CHECK(derive_seed(c, SeedStream::data) != derive_seed(c, SeedStream::init));
    CHECK(derive_seed(c, SeedStream::train) == derive_seed(c, SeedStream::train));
  }
}

TEST_CASE("train, prune and analyze commands") {
  const auto dir = workdir("pipeline");
  const auto cfg = parse_config(small_classifier("schedule", true));

  auto first = cmd_train(cfg, dir / "a");
  auto second = cmd_train(cfg, dir / "b");
  CHECK(slurp(dir / "a" / "model.asym") == slurp(dir / "b" / "model.asym"));
  CHECK(fs::exists(dir / "a" / "train.csv"));
  const auto manifest = slurp(dir / "a" / "manifest.txt");
  CHECK(manifest.find(config_hash(cfg)) != std::string::npos);
  CHECK(manifest.find("seed") != std::string::npos);

  // All-ones profile matches the profile-free baseline.
  auto ones = cmd_train(parse_config(small_classifier("ones")), dir / "ones");
  auto plain = cmd_train(parse_config(small_classifier("none")), dir / "plain");
  const auto m_ones = load_model(dir / "ones" / "model.asym");
  const auto m_plain = load_model(dir / "plain" / "model.asym");
  for (std::size_t l = 0; l < m_ones.size(); ++l) CHECK(m_ones.layer(l).weights == m_plain.layer(l).weights);

  auto pruned = cmd_prune(cfg, dir / "a" / "model.asym", dir / "p");
  const auto before = load_model(dir / "a" / "model.asym");
  const auto after = load_model(dir / "p" / "pruned.asym");
  const auto summary = slurp(dir / "p" / "summary.txt");
  char ratio[64];
  std::snprintf(ratio, sizeof ratio, "%.2f%%", 100.0 * prune_ratio(before, after));
  CHECK(summary.find(ratio) != std::string::npos);
  CHECK(slurp(dir / "p" / "trace.csv").rfind("step,layer,node,accuracy,target\n", 0) == 0);

  auto strict = cfg;
  strict.prune.target_fraction = 1.0;
  strict.prune.retrain_epochs = 0;
  cmd_prune(strict, dir / "a" / "model.asym", dir / "q");
  CHECK(load_model(dir / "q" / "pruned.asym") == before);

  auto analysis_cfg = cfg;
  analysis_cfg.kind = ExperimentKind::analyze_sorting;
  cmd_analyze(analysis_cfg, dir / "a" / "model.asym", dir / "s");
  const auto curves = slurp(dir / "s" / "removal_curves.csv");
  // Fraction 0 rows repeat the final validation accuracy of training.
  const auto train_csv = slurp(dir / "a" / "train.csv");
  const auto last = train_csv.substr(train_csv.rfind('\n', train_csv.size() - 2) + 1);
  std::vector<std::string> cols;
  std::stringstream ss(last);
  for (std::string f; std::getline(ss, f, ',');) cols.push_back(f);
  REQUIRE(cols.size() == 5);
  CHECK(curves.find("node_index,0," + cols[3]) != std::string::npos);
  CHECK(curves.find("random,0," + cols[3]) != std::string::npos);
  CHECK(slurp(dir / "s" / "removal_correlation.csv").rfind("layer,nodes,correlation\n", 0) == 0);
  CHECK_THROWS_AS(cmd_analyze(analysis_cfg, "", dir / "t"), ConfigError);
}

TEST_CASE("gaussian commands") {
  const auto dir = workdir("gaussian");
  const auto cfg = load_config(kConfigs / "gaussian_tied.cfg");
  auto r = cmd_train(cfg, dir);
  CHECK(fs::exists(dir / "fit.csv"));
  cmd_analyze(cfg, dir / "model.asym", dir / "analysis");
  std::ifstream in(dir / "analysis" / "alignment.csv");
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  auto cell = [](const std::string& row, std::size_t k) {
    std::stringstream ss(row);
    std::string f;
    for (std::size_t i = 0; i <= k; ++i) std::getline(ss, f, ',');
    return std::stod(f);
  };
  CHECK(cell(row1, 1) >= 0.95);
  CHECK(cell(row2, 2) >= 0.95);
}

TEST_CASE("command-line exit codes") {
  const auto dir = workdir("exit");
  const std::string exe = ASYMNET_CLI;
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + " > " + (dir / "log.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  std::ofstream(dir / "bad.cfg") << "[experiment]\nnot_a_key = 1\n";
  std::ofstream(dir / "good.cfg") << small_classifier("schedule");
  CHECK(run("train --config " + (dir / "bad.cfg").string()) == 1);
  CHECK(slurp(dir / "log.txt").find("not_a_key") != std::string::npos);
  CHECK(run("train --config " + (dir / "missing.cfg").string()) == 1);
  CHECK(run("prune --config " + (dir / "good.cfg").string()) == 1);  // --model required
  CHECK(run("train -q --config " + (dir / "good.cfg").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "model.asym"));
  std::ofstream(dir / "junk.asym") << "junk";
  CHECK(run("prune --config " + (dir / "good.cfg").string() + " --model " + (dir / "junk.asym").string() +
            " --out " + (dir / "p").string()) == 1);
  CHECK(run("--help") == 0);
}

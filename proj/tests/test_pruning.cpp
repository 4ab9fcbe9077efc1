#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asymnet/errors.hpp"
#include "asymnet/pruning.hpp"
#include "oracles.hpp"

using namespace asymnet;

namespace {

// Classification data labelled by a slightly perturbed copy of `net`, so the
// unpruned net is accurate and removals cost accuracy.
Dataset teacher_data(const Network& net, std::size_t n, Rng& rng, double noise = 0.1) {
  Shape s{n};
  s.insert(s.end(), net.input_shape().begin(), net.input_shape().end());
  auto x = oracle::random_tensor(s, rng);
  auto teacher = net;
  for (std::size_t l = 0; l < teacher.size(); ++l) {
    for (auto& w : teacher.layer(l).weights.storage()) w += noise * rng.normal();
  }
  auto y = predict(teacher, x);
  const auto c = y.extent(1);
  Tensor t({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (y.at(i, k) > y.at(i, best)) best = k;
    t.at(i, best) = 1.0;
  }
  return {x, t, "teacher"};
}

Network toy(Rng& rng, std::size_t in, std::vector<std::size_t> widths, std::size_t out) {
  std::vector<Layer> layers;
  std::size_t w = in;
  for (auto h : widths) {
    layers.push_back(dense_layer(w, h, Activation::relu, make_profile(Schedule::linear, h)));
    w = h;
  }
  layers.push_back(dense_layer(w, out, Activation::linear));
  Network net({in}, layers);
  initialize(net, rng);
  return net;
}

}  // namespace

TEST_CASE("layer visit order") {
  Rng rng(1);
  auto net = toy(rng, 3, {4, 6, 4, 2}, 2);
  CHECK(layer_visit_order(net) == std::vector<std::size_t>{1, 2, 0, 3});
  CHECK(layer_visit_order(net) == oracle::visit_order(net));
}

TEST_CASE("prune follows the pseudocode") {
  Rng rng(2);
  std::size_t with_removals = 0;
  for (int rep = 0; rep < 12; ++rep) {
    auto net = toy(rng, 3, {4 + rng.below(3), 2 + rng.below(4)}, 2 + rng.below(2));
    auto val = teacher_data(net, 200, rng);
    PruneConfig cfg;
    cfg.target_fraction = 0.8 + 0.15 * rng.uniform();
    auto r = prune(net, val, cfg);
    auto want = oracle::prune_transcription(net, val, val, cfg.target_fraction, oracle::visit_order(net));
    REQUIRE(r.report.trace.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(r.report.trace[k].layer == want[k].layer);
      CHECK(r.report.trace[k].node == want[k].node);
      CHECK(r.report.trace[k].accuracy == want[k].accuracy);
      CHECK(r.report.trace[k].accuracy > r.report.target);
    }
    with_removals += !want.empty();
    CHECK(r.report.ratio == prune_ratio(count_weights(net), count_weights(r.network)));
    CHECK(r.report.weights_after == count_weights(r.network));
    CHECK(r.report.accuracy_after_pruning == evaluate(r.network, val, Metric::accuracy));
    for (auto l : net.hidden_layers()) CHECK(r.network.layer(l).output_nodes() >= 1);
  }
  CHECK(with_removals >= 6);
}

TEST_CASE("prune edge cases") {
  Rng rng(3);
  auto net = toy(rng, 4, {5}, 3);
  auto val = teacher_data(net, 300, rng);
  SUBCASE("target above accuracy leaves the net alone") {
    PruneConfig cfg;
    cfg.target_fraction = 1.0;
    auto r = prune(net, val, cfg);
    CHECK(r.report.trace.empty());
    CHECK(r.report.ratio == 1.0);
    CHECK(r.network == net);
  }
  SUBCASE("dead last node goes first with a flat trace") {
    auto dead = silence_nodes(net, 0, {4});
    PruneConfig cfg;
    cfg.target_fraction = 0.999;
    auto r = prune(dead, val, cfg);
    REQUIRE(!r.report.trace.empty());
    CHECK(r.report.trace[0].node == 4);
    if (r.report.trace.size() > 1) CHECK(r.report.trace[1].accuracy == r.report.trace[0].accuracy);
  }
  SUBCASE("zero retraining keeps the pruned accuracy") {
    PruneConfig cfg;
    cfg.retrain_epochs = 0;
    auto r = prune_and_retrain(net, val, val, cfg, TrainConfig{});
    CHECK(r.report.accuracy_after_retraining == r.report.accuracy_after_pruning);
  }
  SUBCASE("bad target fraction") {
    PruneConfig cfg;
    cfg.target_fraction = 1.5;
    CHECK_THROWS_AS(prune(net, val, cfg), ValidationError);
  }
  SUBCASE("given order and reports") {
    auto deep = toy(rng, 4, {5, 3}, 3);
    auto d = teacher_data(deep, 200, rng);
    PruneConfig cfg;
    cfg.layer_order = LayerOrder::given;
    cfg.given_order = {0};
    cfg.target_fraction = 0.5;
    auto r = prune(deep, d, cfg);
    for (const auto& step : r.report.trace) CHECK(step.layer == 0);
    std::ostringstream trace, summary;
    write_trace_csv(trace, r.report);
    write_prune_summary(summary, r.report);
    CHECK(trace.str().rfind("step,layer,node,accuracy,target\n", 0) == 0);
    CHECK(summary.str().find("ratio") != std::string::npos);
  }
}

TEST_CASE("importance scores") {
  Rng rng(4);
  auto l = dense_layer(2, 2, Activation::relu);
  l.weights = Tensor({2, 2}, {3, 0, 0, 4});
  Network net({2}, {l, dense_layer(2, 1, Activation::linear)});
  CHECK(importance_scores(net, 0, ImportanceMeasure::l2_norm, rng) == std::vector<double>{3, 4});
  CHECK(importance_scores(net, 0, ImportanceMeasure::l1_norm, rng) == std::vector<double>{3, 4});

  auto dup = net;
  dup.layer(0).weights = Tensor({2, 2}, {1, 2, 1, 2});
  for (double v : importance_scores(dup, 0, ImportanceMeasure::correlation, rng)) CHECK(v == doctest::Approx(1.0));

  auto wide = toy(rng, 5, {8}, 2);
  auto order = removal_order(wide, 0, ImportanceMeasure::l1_norm, rng);
  std::vector<std::pair<double, std::size_t>> naive;
  for (std::size_t i = 0; i < 8; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += std::abs(wide.layer(0).weights.at(i, j));
    naive.push_back({s, i});
  }
  std::sort(naive.begin(), naive.end());
  for (std::size_t k = 0; k < 8; ++k) CHECK(order[k] == naive[k].second);

  CHECK(removal_order(wide, 0, ImportanceMeasure::node_index, rng) == std::vector<std::size_t>{7, 6, 5, 4, 3, 2, 1, 0});
  auto perm = removal_order(wide, 0, ImportanceMeasure::random, rng);
  std::sort(perm.begin(), perm.end());
  CHECK(perm == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK_THROWS_AS(importance_scores(wide, 2, ImportanceMeasure::l2_norm, rng), IndexError);

  for (auto m : {ImportanceMeasure::node_index, ImportanceMeasure::random, ImportanceMeasure::l2_norm,
                 ImportanceMeasure::l1_norm, ImportanceMeasure::correlation}) {
    CHECK(parse_importance(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_importance("hessian"), ValidationError);
}

TEST_CASE("removal curves") {
  Rng rng(5);
  auto net = toy(rng, 4, {8}, 3);
  auto data = teacher_data(net, 300, rng);
  const auto untouched = net;
  const std::vector<double> fractions{0.0, 0.25, 0.5, 0.9};
  auto order = removal_order(net, 0, ImportanceMeasure::l2_norm, rng);
  auto curve = removal_curve(net, data, 0, order, fractions);
  CHECK(net == untouched);
  CHECK(curve[0] == evaluate(net, data, Metric::accuracy));
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const auto count = removal_count(fractions[k], 8);
    std::vector<std::size_t> nodes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(nodes.rbegin(), nodes.rend());
    Network copy = net;
    for (auto n : nodes) copy = remove_node(copy, 0, n);
    CHECK(curve[k] == evaluate(copy, data, Metric::accuracy));
  }
  auto half_dead = silence_nodes(net, 0, {4, 5, 6, 7});
  auto flat = removal_curve(half_dead, data, 0, removal_order(half_dead, 0, ImportanceMeasure::node_index, rng),
                            {0.0, 0.5});
  CHECK(flat[0] == flat[1]);
  CHECK(removal_count(0.9, 8) == 7);
  CHECK(removal_count(0.5, 8) == 4);
  CHECK(removal_count(0.999, 3) == 2);
  CHECK(removal_count(0.3, 10) == 3);
}

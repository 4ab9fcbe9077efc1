#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "asymnet/datasets.hpp"
#include "asymnet/network.hpp"

namespace asymnet {

enum class LossKind : std::uint8_t { mse, softmax_cross_entropy };

struct LossResult {
  double value = 0.0;
  /// dE/d(prediction), same shape as the prediction.
  Tensor grad;
};

/// mse: mean over every element, grad 2(pred - target)/numel.
/// softmax_cross_entropy: prediction rows are logits, targets one-hot; mean
/// over the batch of -log softmax(pred)[label], grad (softmax - onehot)/N.
LossResult loss(LossKind kind, const Tensor& prediction, const Tensor& target);

/// Row-wise softmax of an N x C matrix (max-subtracted).
Tensor softmax(const Tensor& logits);

enum class OptimizerKind : std::uint8_t { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  /// Inverse-time decay per step: rate_t = learning_rate / (1 + decay * t).
  double decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const OptimizerConfig&) const = default;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const Network& net);

  void step(Network& net, const Gradients& grads);
  /// Rate the next step will use.
  double current_rate() const;
  std::uint64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<LayerGradient> m_;
  std::vector<LayerGradient> v_;
};

/// base_rate / mean of every profile value in the network (or list).
/// Throws ValidationError when nothing carries a profile.
double compensated_rate(double base_rate, const Network& net);
double compensated_rate(double base_rate, const std::vector<SensitivityProfile>& profiles);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  LossKind loss = LossKind::softmax_cross_entropy;
  std::uint64_t seed = 0;
  /// Divide the learning rate by the mean sensitivity.
  bool compensate = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training. Each epoch shuffles with a stream derived from
/// (seed, epoch). Without a validation set, val_* are NaN; val_accuracy is
/// NaN for mse training. Throws DivergenceError naming epoch and batch when
/// the loss goes non-finite.
std::vector<EpochRecord> train(Network& net, const Dataset& train_set, const Dataset* validation,
                               const TrainConfig& config, const EpochCallback& on_epoch = {});

enum class Metric : std::uint8_t { accuracy, mse, cross_entropy };

/// accuracy: fraction of rows whose output argmax equals the target argmax.
/// mse: mean squared error over samples. cross_entropy: mean softmax CE.
double evaluate(const Network& net, const Dataset& data, Metric metric, std::size_t batch = 500);

void write_train_csv(std::ostream& os, const std::vector<EpochRecord>& records);

}  // namespace asymnet

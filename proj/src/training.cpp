#include "asymnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "asymnet/csv.hpp"
#include "asymnet/errors.hpp"

namespace asymnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " must be a matrix, got " + shape_string(t.shape()));
}

double log_sum_exp_row(const double* row, std::size_t c, double& max_out) {
  double m = row[0];
  for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - m);
  max_out = m;
  return m + std::log(sum);
}

std::size_t argmax_row(const double* row, std::size_t c) {
  return static_cast<std::size_t>(std::max_element(row, row + c) - row);
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  require_matrix(logits, "softmax input");
  const auto n = logits.extent(0), c = logits.extent(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.data() + i * c;
    double* p = out.data() + i * c;
    double m = 0.0;
    const double lse = log_sum_exp_row(z, c, m);
    for (std::size_t j = 0; j < c; ++j) p[j] = std::exp(z[j] - lse);
  }
  return out;
}

LossResult loss(LossKind kind, const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  if (prediction.empty()) throw DimensionError("loss: empty batch");
  LossResult r;
  r.grad = Tensor(prediction.shape());
  if (kind == LossKind::mse) {
    const double inv = 1.0 / static_cast<double>(prediction.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
      const double d = prediction[i] - target[i];
      sum += d * d;
      r.grad[i] = 2.0 * d * inv;
    }
    r.value = sum * inv;
    return r;
  }
  require_matrix(prediction, "cross-entropy logits");
  const auto n = prediction.extent(0), c = prediction.extent(1);
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = prediction.data() + i * c;
    const double* t = target.data() + i * c;
    double* g = r.grad.data() + i * c;
    double m = 0.0;
    const double lse = log_sum_exp_row(z, c, m);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - lse);
      sum -= t[j] * (z[j] - lse);
      g[j] = (p - t[j]) * inv;
    }
  }
  r.value = sum * inv;
  return r;
}

Optimizer::Optimizer(OptimizerConfig config, const Network& net) : config_(config) {
  if (!(config_.learning_rate > 0.0) || !std::isfinite(config_.learning_rate)) {
    throw ValidationError("learning rate must be positive and finite");
  }
  if (config_.decay < 0.0) throw ValidationError("learning-rate decay must be non-negative");
  if (config_.kind == OptimizerKind::adam) {
    m_.resize(net.size());
    v_.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto& l = net.layer(i);
      if (!l.weighted()) continue;
      m_[i] = {Tensor(l.weights.shape()), Tensor(l.bias.shape())};
      v_[i] = m_[i];
    }
  }
}

double Optimizer::current_rate() const {
  return config_.learning_rate / (1.0 + config_.decay * static_cast<double>(steps_));
}

void Optimizer::step(Network& net, const Gradients& grads) {
  if (grads.size() != net.size()) throw DimensionError("gradient list does not match the network");
  const double rate = current_rate();
  ++steps_;
  if (config_.kind == OptimizerKind::sgd) {
    apply_update(net, grads, rate);
    return;
  }
  if (m_.size() != net.size()) throw StateError("optimizer state belongs to a different network");
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  auto update = [&](Tensor& w, const Tensor& g, Tensor& m, Tensor& v) {
    if (w.shape() != g.shape() || w.shape() != m.shape()) {
      throw StateError("optimizer state shape " + shape_string(m.shape()) + " does not match parameter " +
                       shape_string(w.shape()));
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] -= rate * mh / (std::sqrt(vh) + config_.epsilon);
    }
  };
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    if (!l.weighted()) continue;
    update(l.weights, grads[i].weights, m_[i].weights, v_[i].weights);
    update(l.bias, grads[i].bias, m_[i].bias, v_[i].bias);
  }
}

double compensated_rate(double base_rate, const std::vector<SensitivityProfile>& profiles) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : profiles) {
    for (double s : p.values) sum += s;
    count += p.size();
  }
  if (count == 0) throw ValidationError("learning-rate compensation needs at least one profiled node");
  return base_rate / (sum / static_cast<double>(count));
}

double compensated_rate(double base_rate, const Network& net) {
  std::vector<SensitivityProfile> profiles;
  for (const auto& l : net.layers())
    if (l.profile) profiles.push_back(*l.profile);
  return compensated_rate(base_rate, profiles);
}

std::vector<EpochRecord> train(Network& net, const Dataset& train_set, const Dataset* validation,
                               const TrainConfig& config, const EpochCallback& on_epoch) {
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");
  const auto n = train_set.size();
  if (n == 0) throw InsufficientSamplesError("training set is empty");
  if (train_set.sample_shape() != net.input_shape()) {
    throw DimensionError("training inputs " + shape_string(train_set.sample_shape()) + " do not match network input " +
                         shape_string(net.input_shape()));
  }
  OptimizerConfig opt_cfg = config.optimizer;
  if (config.compensate) opt_cfg.learning_rate = compensated_rate(opt_cfg.learning_rate, net);
  Optimizer opt(opt_cfg, net);

  const Metric val_metric = config.loss == LossKind::mse ? Metric::mse : Metric::cross_entropy;
  std::vector<EpochRecord> records;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(Rng::derive(config.seed, epoch));
    const auto order = rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < n; first += config.batch_size, ++batch_index) {
      const auto count = std::min(config.batch_size, n - first);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(first),
                                          order.begin() + static_cast<std::ptrdiff_t>(first + count));
      const Dataset batch = train_set.gather(rows);
      auto fwd = forward(net, batch.inputs);
      const auto lr = loss(config.loss, fwd.output, batch.targets);
      if (!std::isfinite(lr.value)) {
        throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
      }
      loss_sum += lr.value * static_cast<double>(count);
      const auto grads = backward(net, fwd.state, lr.grad);
      opt.step(net, grads);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_loss = kNaN;
    rec.val_accuracy = kNaN;
    if (validation != nullptr && validation->size() > 0) {
      rec.val_loss = evaluate(net, *validation, val_metric);
      if (config.loss == LossKind::softmax_cross_entropy) rec.val_accuracy = evaluate(net, *validation, Metric::accuracy);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return records;
}

double evaluate(const Network& net, const Dataset& data, Metric metric, std::size_t batch) {
  const auto n = data.size();
  if (n == 0) throw InsufficientSamplesError("cannot evaluate on an empty dataset");
  if (batch == 0) batch = n;
  double total = 0.0;
  for (std::size_t first = 0; first < n; first += batch) {
    const auto count = std::min(batch, n - first);
    const Dataset part = data.slice(first, count);
    const Tensor out = predict(net, part.inputs);
    if (out.shape() != part.targets.shape()) {
      throw DimensionError("network output " + shape_string(out.shape()) + " does not match targets " +
                           shape_string(part.targets.shape()));
    }
    switch (metric) {
      case Metric::accuracy: {
        require_matrix(out, "classifier output");
        const auto c = out.extent(1);
        for (std::size_t i = 0; i < count; ++i) {
          if (argmax_row(out.data() + i * c, c) == argmax_row(part.targets.data() + i * c, c)) total += 1.0;
        }
        break;
      }
      case Metric::mse:
        total += loss(LossKind::mse, out, part.targets).value * static_cast<double>(count);
        break;
      case Metric::cross_entropy:
        total += loss(LossKind::softmax_cross_entropy, out, part.targets).value * static_cast<double>(count);
        break;
    }
  }
  return total / static_cast<double>(n);
}

void write_train_csv(std::ostream& os, const std::vector<EpochRecord>& records) {
  os << "epoch,train_loss,val_loss,val_accuracy,seconds\n";
  for (const auto& r : records) {
    csv_row(os, {std::to_string(r.epoch), csv_number(r.train_loss), csv_number(r.val_loss), csv_number(r.val_accuracy),
                 csv_number(r.seconds)});
  }
}

}  // namespace asymnet

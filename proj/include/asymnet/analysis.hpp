#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "asymnet/datasets.hpp"
#include "asymnet/network.hpp"
#include "asymnet/training.hpp"

namespace asymnet {

// ---------------------------------------------------------------------------
// Shallow model y = W2 D f0(W1 x)

struct ShallowModel {
  /// p x n encoder.
  Tensor w1;
  /// m x p decoder; empty when tied (decoder is w1^T).
  Tensor w2;
  bool tied = true;
  SensitivityProfile profile;
  Activation base = Activation::linear;

  std::size_t inputs() const { return w1.extent(1); }
  std::size_t hidden() const { return w1.extent(0); }
  std::size_t outputs() const { return tied ? inputs() : w2.extent(0); }
  Tensor decoder() const;
  /// N x n -> N x m.
  Tensor predict(const Tensor& x) const;
};

/// Weights uniform in [-0.5, 0.5). Base must be linear or relu.
ShallowModel make_shallow(std::size_t inputs, std::size_t hidden, std::size_t outputs, SensitivityProfile profile,
                          Activation base, bool tied, Rng& rng);

/// Mean over samples of ||y - y_hat||^2.
double shallow_loss(const ShallowModel& model, const Dataset& data);

struct FitOptions {
  std::size_t iterations = 200000;
  double learning_rate = 0.05;
  /// Stop once every gradient entry is at most this in magnitude.
  double tolerance = 1e-12;
};

struct FitResult {
  ShallowModel model;
  double loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Full-batch gradient descent on shallow_loss. Linear models work on second
/// moments of the data, so iterations cost O(p n m) regardless of N.
/// Throws DivergenceError naming the iteration when the loss stops being finite.
FitResult fit_shallow(ShallowModel model, const Dataset& data, const FitOptions& options = {});

/// Runs fit_shallow once per stage with that stage's sensitivity vector,
/// carrying weights forward.
FitResult staged_fit(ShallowModel model, const Dataset& data, const std::vector<std::vector<double>>& stages,
                     const FitOptions& options = {});

/// Cumulative stage vectors (1, eps, ...), (1, 1, eps, ...), ... for `stages` stages.
std::vector<std::vector<double>> staged_schedule(std::size_t hidden, std::size_t stages, double eps);

// ---------------------------------------------------------------------------
// Eigen-alignment

struct AlignmentReport {
  /// nodes x eigenvectors, |cos| of each weight row against each eigenvector.
  Tensor cosines;
  std::vector<double> eigenvalues;
  /// Eigenvector index with the largest |cos| per node.
  std::vector<std::size_t> best;
  /// Nodes whose weight vector had zero norm (their cosines are 0).
  std::vector<bool> zero_norm;

  double cosine(std::size_t node, std::size_t eigen) const { return cosines.at(node, eigen); }
};

/// Rows of `weights` (p x n) against the eigenvectors of an n x n covariance.
AlignmentReport align_report(const Tensor& weights, const Tensor& covariance);
AlignmentReport align_report(const ShallowModel& model, const Tensor& covariance);
/// Rows of a dense layer's weight matrix.
AlignmentReport align_report(const Network& net, std::size_t layer, const Tensor& covariance);

void write_alignment_csv(std::ostream& os, const AlignmentReport& report);
/// Whitespace-separated matrix: one line per node, one column per eigenvector.
void write_alignment_matrix(std::ostream& os, const AlignmentReport& report);

// ---------------------------------------------------------------------------
// Sparse decomposition: minimize ||y - W z||_2 + mu ||z||_1

struct SparseOptions {
  double mu = 0.01;
  std::size_t max_iterations = 20000;
  /// Relative objective change that counts as converged.
  double tolerance = 1e-8;
};

struct SparseCode {
  std::vector<double> z;
  double objective = 0.0;
  double residual_norm = 0.0;
  double mu = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Objective after every accepted iteration (starting with z = 0).
  std::vector<double> trace;
};

/// Columns scaled to unit norm; zero columns stay zero.
Tensor normalize_columns(const Tensor& features);

double sparse_objective(const Tensor& features, std::span<const double> y, std::span<const double> z, double mu);

/// Proximal gradient with backtracking on a d x n feature matrix. Columns are
/// normalized first. The objective never increases between iterations; when
/// the iteration cap is hit the result carries converged = false.
SparseCode sparse_decompose(const Tensor& features, std::span<const double> y, const SparseOptions& options = {});

// ---------------------------------------------------------------------------
// Importance correlations

/// Pearson correlation. Throws ValidationError when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);
/// Correlation of values[i] with n - 1 - i, so values that fall with index
/// score positive.
double index_correlation(std::span<const double> values);

/// Average |z| per node of a dense `layer` over the first `samples` targets
/// of `data`. Node i's feature is its outgoing weight column in the next
/// (dense) layer, so for an autoencoder the targets are written as sparse
/// combinations of the decoder columns.
std::vector<double> mean_abs_code(const Network& net, std::size_t layer, const Dataset& data, std::size_t samples,
                                  const SparseOptions& options = {});

/// Increase of `loss` (mse or cross_entropy) on `data` when each node of
/// `layer` alone is cut off from the rest of the network.
std::vector<double> removal_loss_increase(const Network& net, std::size_t layer, const Dataset& data, Metric loss);

enum class CorrelationMode : std::uint8_t { sparse_weights, removal_loss };

struct CorrelationOptions {
  CorrelationMode mode = CorrelationMode::removal_loss;
  Metric loss = Metric::cross_entropy;  // removal_loss only
  std::size_t samples = 30;             // sparse_weights only
  SparseOptions sparse;
};

double importance_correlation(const Network& net, std::size_t layer, const Dataset& data,
                              const CorrelationOptions& options);

// ---------------------------------------------------------------------------
// Reconstruction curves and repeatability

enum class NodeSelection : std::uint8_t { first_p, random_p };

/// Reconstruction mse keeping p hidden nodes of `layer` (others feed nothing)
/// for each p in `node_counts`. Requires output shape == input shape.
std::vector<double> reconstruction_curve(const Network& net, std::size_t layer, const Dataset& data,
                                         const std::vector<std::size_t>& node_counts, NodeSelection selection,
                                         Rng& rng);

/// raw compares stored weights. effective scales output node i's weights by
/// s_i first: for ReLU and linear bases s*f0(w.x) = f0(s*w.x), so these are
/// the weights the network computes with, comparable across profiles.
enum class WeightView : std::uint8_t { raw, effective };

/// Weights of a weighted layer under `view`.
Tensor layer_weights(const Layer& layer, WeightView view);

/// Mean over unordered pairs of the per-layer mean squared weight difference.
/// One entry per weighted layer; networks must share a structure.
std::vector<double> pairwise_weight_mse(const std::vector<Network>& nets, WeightView view = WeightView::raw);

/// Trains `runs` replicas with trainer(run, same_data) and returns
/// pairwise_weight_mse of the results.
using ReplicaTrainer = std::function<Network(std::size_t run, bool same_data)>;
std::vector<double> repeatability(const ReplicaTrainer& trainer, std::size_t runs, bool same_data,
                                  WeightView view = WeightView::raw);

/// Two-column CSV with a header.
void write_series_csv(std::ostream& os, std::string_view x_name, std::string_view y_name,
                      const std::vector<double>& x, const std::vector<double>& y);

}  // namespace asymnet

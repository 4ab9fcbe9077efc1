#include "asymnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "asymnet/csv.hpp"
#include "asymnet/errors.hpp"
#include "asymnet/kernels.hpp"
#include "asymnet/linalg.hpp"

namespace asymnet {

namespace {

void require_shallow_base(Activation a) {
  if (a != Activation::linear && a != Activation::relu) {
    throw ValidationError("shallow model base must be linear or relu, got " + std::string(to_string(a)));
  }
}

void check_shallow_data(const ShallowModel& m, const Dataset& data) {
  if (data.inputs.rank() != 2 || data.targets.rank() != 2) {
    throw DimensionError("shallow model data must be N x n inputs and N x m targets");
  }
  if (data.inputs.extent(1) != m.inputs() || data.targets.extent(1) != m.outputs()) {
    throw DimensionError("shallow model " + std::to_string(m.inputs()) + " -> " + std::to_string(m.outputs()) +
                         " does not fit data " + shape_string(data.inputs.shape()) + " -> " +
                         shape_string(data.targets.shape()));
  }
  if (data.size() == 0) throw InsufficientSamplesError("shallow fit needs data");
}

double max_abs_entry(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

// Scales row i of a p x k matrix by s[i].
Tensor scale_rows(const Tensor& a, const std::vector<double>& s) {
  Tensor out = a;
  const auto k = a.extent(1);
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) *= s[i];
  return out;
}

struct Gradient {
  double loss = 0.0;
  Tensor w1;
  Tensor w2;  // empty when tied
};

struct Moments {
  Tensor xx;  // n x n
  Tensor yx;  // m x n
  double yy = 0.0;
};

Moments second_moments(const Dataset& data) {
  const auto n_samples = data.size();
  const auto n = data.inputs.extent(1), m = data.targets.extent(1);
  Moments mo{Tensor({n, n}), Tensor({m, n}), 0.0};
  kernels::gemm_tn(data.inputs.data(), data.inputs.data(), mo.xx.data(), n, n, n_samples);
  kernels::gemm_tn(data.targets.data(), data.inputs.data(), mo.yx.data(), m, n, n_samples);
  const double inv = 1.0 / static_cast<double>(n_samples);
  for (auto& v : mo.xx.storage()) v *= inv;
  for (auto& v : mo.yx.storage()) v *= inv;
  for (double v : data.targets.values()) mo.yy += v * v;
  mo.yy *= inv;
  return mo;
}

// Linear model: E = tr(Cyy) - 2 <B, Cyx> + tr(B Cxx B^T), with B = Dec D W1.
Gradient linear_gradient(const ShallowModel& m, const Moments& mo) {
  const auto& s = m.profile.values;
  const Tensor v = scale_rows(m.w1, s);  // D W1
  const Tensor dec = m.decoder();
  const Tensor b = matmul(dec, v);
  const Tensor bxx = matmul(b, mo.xx);
  Gradient g;
  g.loss = mo.yy;
  Tensor db(b.shape());
  for (std::size_t k = 0; k < b.size(); ++k) {
    g.loss += -2.0 * b[k] * mo.yx[k] + bxx[k] * b[k];
    db[k] = 2.0 * (bxx[k] - mo.yx[k]);
  }
  // Encoder path: D Dec^T dB.
  g.w1 = scale_rows(matmul(transpose(dec), db), s);
  const Tensor ddec = matmul(db, transpose(v));  // m x p
  if (m.tied) {
    const Tensor t = transpose(ddec);
    for (std::size_t k = 0; k < t.size(); ++k) g.w1[k] += t[k];
  } else {
    g.w2 = ddec;
  }
  return g;
}

Gradient data_gradient(const ShallowModel& m, const Dataset& data) {
  const auto n_samples = data.size();
  const auto n = m.inputs(), p = m.hidden(), out = m.outputs();
  const auto& s = m.profile.values;
  const Tensor dec = m.decoder();
  Tensor u({n_samples, p});
  kernels::gemm_nt(data.inputs.data(), m.w1.data(), u.data(), n_samples, p, n);
  Tensor z({n_samples, p});
  for (std::size_t i = 0; i < n_samples; ++i)
    for (std::size_t j = 0; j < p; ++j) z.at(i, j) = scaled_activation(u.at(i, j), s[j], m.base);
  Tensor y({n_samples, out});
  kernels::gemm_nt(z.data(), dec.data(), y.data(), n_samples, out, p);
  Gradient g;
  const double inv = 1.0 / static_cast<double>(n_samples);
  Tensor dy({n_samples, out});
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double r = y[k] - data.targets[k];
    g.loss += r * r * inv;
    dy[k] = 2.0 * r * inv;
  }
  Tensor ddec({out, p});
  kernels::gemm_tn(dy.data(), z.data(), ddec.data(), out, p, n_samples);
  Tensor du({n_samples, p});
  kernels::gemm_nn(dy.data(), dec.data(), du.data(), n_samples, p, out);
  for (std::size_t i = 0; i < n_samples; ++i)
    for (std::size_t j = 0; j < p; ++j) du.at(i, j) *= scaled_derivative(u.at(i, j), s[j], m.base);
  g.w1 = Tensor({p, n});
  kernels::gemm_tn(du.data(), data.inputs.data(), g.w1.data(), p, n, n_samples);
  if (m.tied) {
    const Tensor t = transpose(ddec);
    for (std::size_t k = 0; k < t.size(); ++k) g.w1[k] += t[k];
  } else {
    g.w2 = ddec;
  }
  return g;
}

}  // namespace

Tensor ShallowModel::decoder() const { return tied ? transpose(w1) : w2; }

Tensor ShallowModel::predict(const Tensor& x) const {
  if (x.rank() != 2 || x.extent(1) != inputs()) {
    throw DimensionError("shallow model expects N x " + std::to_string(inputs()) + " inputs, got " +
                         shape_string(x.shape()));
  }
  Tensor h = matmul(x, transpose(w1));
  for (std::size_t i = 0; i < h.extent(0); ++i)
    for (std::size_t j = 0; j < h.extent(1); ++j) h.at(i, j) = scaled_activation(h.at(i, j), profile.values[j], base);
  return matmul(h, transpose(decoder()));
}

ShallowModel make_shallow(std::size_t inputs, std::size_t hidden, std::size_t outputs, SensitivityProfile profile,
                          Activation base, bool tied, Rng& rng) {
  require_shallow_base(base);
  validate_profile(profile.values);
  if (profile.size() != hidden) {
    throw ProfileError("profile has " + std::to_string(profile.size()) + " entries for " + std::to_string(hidden) +
                       " hidden nodes");
  }
  if (tied && inputs != outputs) throw DimensionError("tied shallow model needs equal input and output widths");
  ShallowModel m;
  m.tied = tied;
  m.base = base;
  m.profile = std::move(profile);
  m.w1 = Tensor({hidden, inputs});
  for (auto& v : m.w1.storage()) v = rng.uniform(-0.5, 0.5);
  if (!tied) {
    m.w2 = Tensor({outputs, hidden});
    for (auto& v : m.w2.storage()) v = rng.uniform(-0.5, 0.5);
  }
  return m;
}

double shallow_loss(const ShallowModel& model, const Dataset& data) {
  check_shallow_data(model, data);
  const Tensor y = model.predict(data.inputs);
  double sum = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double r = y[k] - data.targets[k];
    sum += r * r;
  }
  return sum / static_cast<double>(data.size());
}

FitResult fit_shallow(ShallowModel model, const Dataset& data, const FitOptions& options) {
  require_shallow_base(model.base);
  validate_profile(model.profile.values);
  check_shallow_data(model, data);
  const bool linear = model.base == Activation::linear;
  const Moments mo = linear ? second_moments(data) : Moments{};
  FitResult r;
  for (std::size_t it = 0; it < options.iterations; ++it) {
    const Gradient g = linear ? linear_gradient(model, mo) : data_gradient(model, data);
    if (!std::isfinite(g.loss)) throw DivergenceError("shallow fit diverged at iteration " + std::to_string(it));
    r.loss = g.loss;
    r.iterations = it;
    double grad_max = max_abs_entry(g.w1);
    if (!model.tied) grad_max = std::max(grad_max, max_abs_entry(g.w2));
    if (grad_max <= options.tolerance) {
      r.converged = true;
      break;
    }
    for (std::size_t k = 0; k < g.w1.size(); ++k) model.w1[k] -= options.learning_rate * g.w1[k];
    if (!model.tied)
      for (std::size_t k = 0; k < g.w2.size(); ++k) model.w2[k] -= options.learning_rate * g.w2[k];
    r.iterations = it + 1;
  }
  r.loss = shallow_loss(model, data);
  if (!std::isfinite(r.loss)) throw DivergenceError("shallow fit diverged at iteration " + std::to_string(r.iterations));
  r.model = std::move(model);
  return r;
}

FitResult staged_fit(ShallowModel model, const Dataset& data, const std::vector<std::vector<double>>& stages,
                     const FitOptions& options) {
  if (stages.empty()) throw ValidationError("staged fit needs at least one stage");
  FitResult r;
  std::size_t total = 0;
  for (const auto& stage : stages) {
    if (stage.size() != model.hidden()) {
      throw ProfileError("stage vector has " + std::to_string(stage.size()) + " entries for " +
                         std::to_string(model.hidden()) + " hidden nodes");
    }
    model.profile = explicit_profile(stage);
    r = fit_shallow(std::move(model), data, options);
    total += r.iterations;
    model = r.model;
  }
  r.iterations = total;
  return r;
}

std::vector<std::vector<double>> staged_schedule(std::size_t hidden, std::size_t stages, double eps) {
  if (stages == 0 || stages > hidden) throw ValidationError("stage count must lie in [1, hidden]");
  if (!(eps > 0.0 && eps <= 1.0)) throw ProfileError("stage epsilon must lie in (0, 1]");
  std::vector<std::vector<double>> out;
  for (std::size_t k = 1; k <= stages; ++k) {
    std::vector<double> s(hidden, eps);
    std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), 1.0);
    out.push_back(std::move(s));
  }
  return out;
}

AlignmentReport align_report(const Tensor& weights, const Tensor& covariance) {
  if (weights.rank() != 2 || covariance.rank() != 2 || covariance.extent(0) != weights.extent(1)) {
    throw DimensionError("alignment needs p x n weights and an n x n covariance, got " +
                         shape_string(weights.shape()) + " and " + shape_string(covariance.shape()));
  }
  const auto eig = sym_eig(covariance);
  const auto p = weights.extent(0), n = weights.extent(1);
  AlignmentReport rep;
  rep.eigenvalues = eig.values;
  rep.cosines = Tensor({p, n});
  rep.best.assign(p, 0);
  rep.zero_norm.assign(p, false);
  for (std::size_t i = 0; i < p; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) norm += weights.at(i, j) * weights.at(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      rep.zero_norm[i] = true;
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += weights.at(i, j) * eig.vectors.at(j, k);
      rep.cosines.at(i, k) = std::min(1.0, std::abs(dot) / norm);
      if (rep.cosines.at(i, k) > rep.cosines.at(i, rep.best[i])) rep.best[i] = k;
    }
  }
  return rep;
}

AlignmentReport align_report(const ShallowModel& model, const Tensor& covariance) {
  return align_report(model.w1, covariance);
}

AlignmentReport align_report(const Network& net, std::size_t layer, const Tensor& covariance) {
  const auto& l = net.layer(layer);
  if (l.kind != LayerKind::dense) throw UnsupportedLayerError("alignment needs a dense layer");
  return align_report(l.weights, covariance);
}

void write_alignment_csv(std::ostream& os, const AlignmentReport& report) {
  const auto p = report.cosines.extent(0), n = report.cosines.extent(1);
  os << "node";
  for (std::size_t k = 0; k < n; ++k) os << ",cos_u" << k + 1;
  os << ",best,zero_norm\n";
  for (std::size_t i = 0; i < p; ++i) {
    os << i + 1;
    for (std::size_t k = 0; k < n; ++k) os << ',' << csv_number(report.cosine(i, k));
    os << ',' << report.best[i] + 1 << ',' << (report.zero_norm[i] ? 1 : 0) << '\n';
  }
}

void write_alignment_matrix(std::ostream& os, const AlignmentReport& report) {
  const auto p = report.cosines.extent(0), n = report.cosines.extent(1);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < n; ++k) os << (k ? " " : "") << csv_number(report.cosine(i, k));
    os << '\n';
  }
}

Tensor normalize_columns(const Tensor& features) {
  if (features.rank() != 2) throw DimensionError("features must be a d x n matrix");
  Tensor out = features;
  const auto d = features.extent(0), n = features.extent(1);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += features.at(i, j) * features.at(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i) out.at(i, j) /= norm;
  }
  return out;
}

namespace {

double residual(const Tensor& w, std::span<const double> y, std::span<const double> z, std::vector<double>& r) {
  const auto d = w.extent(0), n = w.extent(1);
  r.assign(y.begin(), y.end());
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w.at(i, j) * z[j];
    r[i] -= acc;
  }
  double norm = 0.0;
  for (double v : r) norm += v * v;
  return std::sqrt(norm);
}

double l1(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += std::abs(v);
  return s;
}

}  // namespace

double sparse_objective(const Tensor& features, std::span<const double> y, std::span<const double> z, double mu) {
  if (features.rank() != 2 || features.extent(0) != y.size() || features.extent(1) != z.size()) {
    throw DimensionError("sparse objective: features " + shape_string(features.shape()) + " vs y[" +
                         std::to_string(y.size()) + "], z[" + std::to_string(z.size()) + "]");
  }
  std::vector<double> r;
  return residual(features, y, z, r) + mu * l1(z);
}

SparseCode sparse_decompose(const Tensor& features, std::span<const double> y, const SparseOptions& options) {
  if (options.mu < 0.0) throw ValidationError("mu must be non-negative");
  if (features.rank() != 2 || features.extent(0) != y.size()) {
    throw DimensionError("sparse decomposition: features " + shape_string(features.shape()) + " vs y[" +
                         std::to_string(y.size()) + "]");
  }
  const Tensor w = normalize_columns(features);
  const auto d = w.extent(0), n = w.extent(1);
  const double mu = options.mu;

  SparseCode code;
  code.mu = mu;
  code.z.assign(n, 0.0);
  std::vector<double> r, r_next, grad(n), z_next(n);
  double f = residual(w, y, code.z, r);
  double obj = f;
  code.trace.push_back(obj);
  double step = 1.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    code.iterations = it + 1;
    if (f == 0.0) {
      // y is reproduced exactly; the smooth part is at its minimum.
      code.converged = true;
      break;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += w.at(i, j) * r[i];
      grad[j] = -acc / f;
    }
    step *= 2.0;
    bool accepted = false;
    double f_next = 0.0, obj_next = 0.0;
    while (step > 1e-30) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = code.z[j] - step * grad[j];
        const double t = step * mu;
        z_next[j] = v > t ? v - t : (v < -t ? v + t : 0.0);
      }
      f_next = residual(w, y, z_next, r_next);
      double lin = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dz = z_next[j] - code.z[j];
        lin += grad[j] * dz;
        sq += dz * dz;
      }
      obj_next = f_next + mu * l1(z_next);
      if (f_next <= f + lin + sq / (2.0 * step) && obj_next <= obj) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      code.converged = true;
      break;
    }
    const double change = (obj - obj_next) / std::max(obj, 1e-300);
    code.z = z_next;
    r.swap(r_next);
    f = f_next;
    obj = obj_next;
    code.trace.push_back(obj);
    if (change <= options.tolerance) {
      code.converged = true;
      break;
    }
  }
  code.objective = obj;
  code.residual_norm = f;
  return code;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pearson: length mismatch");
  if (a.size() < 2) throw InsufficientSamplesError("pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ValidationError("correlation is undefined for a constant vector");
  return sab / std::sqrt(saa * sbb);
}

double index_correlation(std::span<const double> values) {
  std::vector<double> idx(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(idx.size() - 1 - i);
  return pearson(values, idx);
}

std::vector<double> mean_abs_code(const Network& net, std::size_t layer, const Dataset& data, std::size_t samples,
                                  const SparseOptions& options) {
  const auto& l = net.layer(layer);
  if (l.kind != LayerKind::dense || layer + 1 >= net.size() || net.layer(layer + 1).kind != LayerKind::dense) {
    throw UnsupportedLayerError("sparse codes need a dense layer followed by a dense layer");
  }
  // Column i of the next layer's weights is what node i writes to the output.
  const Tensor& features = net.layer(layer + 1).weights;
  const auto d = features.extent(0);
  if (data.size() == 0 || shape_size(data.target_shape()) != d) {
    throw DimensionError("targets of " + shape_string(data.target_shape()) + " do not match " + std::to_string(d) +
                         "-wide features");
  }
  if (samples == 0 || samples > data.size()) throw ValidationError("sample count must lie in [1, dataset size]");
  std::vector<double> mean(l.output_nodes(), 0.0);
  for (std::size_t k = 0; k < samples; ++k) {
    const std::span<const double> y(data.targets.data() + k * d, d);
    const auto code = sparse_decompose(features, y, options);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += std::abs(code.z[j]);
  }
  for (auto& v : mean) v /= static_cast<double>(samples);
  return mean;
}

std::vector<double> removal_loss_increase(const Network& net, std::size_t layer, const Dataset& data, Metric loss) {
  if (loss == Metric::accuracy) throw ValidationError("removal loss needs mse or cross_entropy");
  const double base = evaluate(net, data, loss);
  const auto n = net.layer(layer).output_nodes();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = evaluate(silence_nodes(net, layer, {i}), data, loss) - base;
  return out;
}

double importance_correlation(const Network& net, std::size_t layer, const Dataset& data,
                              const CorrelationOptions& options) {
  const auto values = options.mode == CorrelationMode::sparse_weights
                          ? mean_abs_code(net, layer, data, options.samples, options.sparse)
                          : removal_loss_increase(net, layer, data, options.loss);
  return index_correlation(values);
}

std::vector<double> reconstruction_curve(const Network& net, std::size_t layer, const Dataset& data,
                                         const std::vector<std::size_t>& node_counts, NodeSelection selection,
                                         Rng& rng) {
  if (shape_size(net.output_shape()) != shape_size(net.input_shape())) {
    throw ValidationError("reconstruction curves need an auto-associative network (output " +
                          shape_string(net.output_shape()) + " vs input " + shape_string(net.input_shape()) + ")");
  }
  const auto n = net.layer(layer).output_nodes();
  std::vector<double> out;
  for (auto p : node_counts) {
    if (p > n) {
      throw ValidationError("cannot keep " + std::to_string(p) + " of " + std::to_string(n) + " nodes");
    }
    std::vector<std::size_t> order(n);
    if (selection == NodeSelection::random_p) {
      order = rng.permutation(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
    }
    const std::vector<std::size_t> dropped(order.begin() + static_cast<std::ptrdiff_t>(p), order.end());
    out.push_back(evaluate(dropped.empty() ? net : silence_nodes(net, layer, dropped), data, Metric::mse));
  }
  return out;
}

Tensor layer_weights(const Layer& layer, WeightView view) {
  if (view == WeightView::raw || !layer.profile) return layer.weights;
  Tensor w = layer.weights;
  const auto nodes = w.extent(0);
  const auto per_node = w.size() / nodes;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double s = layer.profile->values[i];
    for (std::size_t k = 0; k < per_node; ++k) w[i * per_node + k] *= s;
  }
  return w;
}

std::vector<double> pairwise_weight_mse(const std::vector<Network>& nets, WeightView view) {
  if (nets.size() < 2) throw InsufficientSamplesError("pairwise comparison needs at least two networks");
  const auto sig = nets.front().structure_signature();
  for (const auto& n : nets) {
    if (n.structure_signature() != sig) throw DimensionError("replica networks differ in structure");
  }
  const auto layers = nets.front().weighted_layers();
  std::vector<double> out(layers.size(), 0.0);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < nets.size(); ++a) {
    for (std::size_t b = a + 1; b < nets.size(); ++b) {
      ++pairs;
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto wa = layer_weights(nets[a].layer(layers[k]), view);
        const auto wb = layer_weights(nets[b].layer(layers[k]), view);
        double sum = 0.0;
        for (std::size_t i = 0; i < wa.size(); ++i) sum += (wa[i] - wb[i]) * (wa[i] - wb[i]);
        out[k] += sum / static_cast<double>(wa.size());
      }
    }
  }
  for (auto& v : out) v /= static_cast<double>(pairs);
  return out;
}

std::vector<double> repeatability(const ReplicaTrainer& trainer, std::size_t runs, bool same_data,
                                  WeightView view) {
  if (runs < 2) throw InsufficientSamplesError("repeatability needs at least two runs");
  std::vector<Network> nets;
  nets.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) nets.push_back(trainer(r, same_data));
  return pairwise_weight_mse(nets, view);
}

void write_series_csv(std::ostream& os, std::string_view x_name, std::string_view y_name,
                      const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("series columns differ in length");
  os << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) csv_row(os, {csv_number(x[i]), csv_number(y[i])});
}

}  // namespace asymnet

#pragma once

// Independent reference implementations the unit and acceptance tests compare
// against. Nothing here calls into the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "asymnet/datasets.hpp"
#include "asymnet/network.hpp"
#include "asymnet/pruning.hpp"
#include "asymnet/rng.hpp"
#include "asymnet/tensor.hpp"
#include "asymnet/training.hpp"

namespace oracle {

using asymnet::Rng;
using asymnet::Tensor;

inline Tensor random_tensor(asymnet::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_symmetric(std::size_t n, Rng& rng) {
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) a.at(i, j) = a.at(j, i) = rng.uniform(-1.0, 1.0);
  }
  return a;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a.at(i, t) * b.at(t, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

/// Direct cross-correlation, zero padding `pad` on every side.
inline Tensor conv(const Tensor& x, const Tensor& f, std::size_t pad) {
  const auto cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const auto cout = f.extent(0), kh = f.extent(2), kw = f.extent(3);
  const auto oh = h + 2 * pad - kh + 1, ow = w + 2 * pad - kw + 1;
  Tensor y({cout, oh, ow});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < cin; ++ch) {
          for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
              const auto rr = static_cast<long>(r + i) - static_cast<long>(pad);
              const auto cc = static_cast<long>(c + j) - static_cast<long>(pad);
              if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
              s += x.at(ch, rr, cc) * f[((o * cin + ch) * kh + i) * kw + j];
            }
          }
        }
        y.at(o, r, c) = s;
      }
    }
  }
  return y;
}

/// 2x2/stride-2 window scan; first strict maximum in row-major window order.
inline std::pair<Tensor, std::vector<std::size_t>> pool(const Tensor& x) {
  const auto ch = x.extent(0), h = x.extent(1), w = x.extent(2);
  const auto oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor y({ch, oh, ow});
  std::vector<std::size_t> idx(ch * oh * ow);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < 2; ++i) {
          for (std::size_t j = 0; j < 2; ++j) {
            const auto rr = 2 * r + i, cc = 2 * q + j;
            if (rr >= h || cc >= w) continue;
            if (x.at(c, rr, cc) > best) {
              best = x.at(c, rr, cc);
              arg = (c * h + rr) * w + cc;
            }
          }
        }
        y.at(c, r, q) = best;
        idx[(c * oh + r) * ow + q] = arg;
      }
    }
  }
  return {y, idx};
}

// ---------------------------------------------------------------------------
// Eigenvalues as roots of the characteristic polynomial.

/// Coefficients c[0..n] of det(x I - A) = sum c[k] x^k by Faddeev-LeVerrier.
inline std::vector<double> char_poly(const Tensor& a) {
  const auto n = a.extent(0);
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  Tensor m({n, n});  // M_0 = 0
  for (std::size_t k = 1; k <= n; ++k) {
    Tensor next = oracle::matmul(a, m);
    for (std::size_t i = 0; i < n; ++i) next.at(i, i) += c[n - k + 1];
    m = next;
    const Tensor am = oracle::matmul(a, m);
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += am.at(i, i);
    c[n - k] = -tr / static_cast<double>(k);
  }
  return c;
}

inline double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
  return v;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

/// Real roots of a polynomial known to have only real roots, ascending.
/// Critical points (roots of the derivative) split the line into monotone
/// pieces; each piece with a sign change is bisected.
inline std::vector<double> real_roots(const std::vector<double>& c, double bound) {
  const auto degree = c.size() - 1;
  if (degree == 1) return {-c[0] / c[1]};
  auto crit = real_roots(poly_derivative(c), bound);
  std::vector<double> knots{-bound};
  knots.insert(knots.end(), crit.begin(), crit.end());
  knots.push_back(bound);
  std::vector<double> roots;
  for (std::size_t k = 0; k + 1 < knots.size() && roots.size() < degree; ++k) {
    double lo = knots[k], hi = knots[k + 1];
    double flo = poly_eval(c, lo), fhi = poly_eval(c, hi);
    if (flo == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if ((flo < 0) == (fhi < 0)) {
      // Touching root at a critical point: keep it when the value is tiny.
      if (k + 1 < knots.size() - 1 && std::abs(fhi) < 1e-12) roots.push_back(hi);
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = poly_eval(c, mid);
      if ((fm < 0) == (flo < 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline std::vector<double> eigenvalues(const Tensor& a) {
  double bound = 0.0;  // Gershgorin
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < a.extent(1); ++j) r += std::abs(a.at(i, j));
    bound = std::max(bound, r);
  }
  auto roots = real_roots(char_poly(a), bound + 1.0);
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

// ---------------------------------------------------------------------------
// Sparse code by exact coordinate minimization of ||y - W z||_2 + mu ||z||_1.

inline double sparse_objective(const Tensor& w, const std::vector<double>& y, const std::vector<double>& z,
                               double mu) {
  double r2 = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < w.extent(0); ++i) {
    double r = y[i];
    for (std::size_t j = 0; j < w.extent(1); ++j) r -= w.at(i, j) * z[j];
    r2 += r * r;
  }
  for (double v : z) l1 += std::abs(v);
  return std::sqrt(r2) + mu * l1;
}

/// `w` must have unit columns. For one coordinate with the rest fixed,
/// ||r - w_j t|| = sqrt((t - a)^2 + b^2) with a = w_j.r and b^2 = |r|^2 - a^2,
/// so the minimizer shrinks a by mu b / sqrt(1 - mu^2) toward zero.
inline std::vector<double> sparse_cd(const Tensor& w, const std::vector<double>& y, double mu,
                                     std::size_t sweeps = 20000) {
  const auto d = w.extent(0), n = w.extent(1);
  std::vector<double> z(n, 0.0);
  if (mu >= 1.0) return z;
  std::vector<double> r = y;
  for (std::size_t s = 0; s < sweeps; ++s) {
    double change = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < d; ++i) r[i] += w.at(i, j) * z[j];
      double a = 0.0, rr = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        a += w.at(i, j) * r[i];
        rr += r[i] * r[i];
      }
      const double b = std::sqrt(std::max(rr - a * a, 0.0));
      const double shrink = mu * b / std::sqrt(1.0 - mu * mu);
      const double t = std::abs(a) > shrink ? (a > 0 ? a - shrink : a + shrink) : 0.0;
      change = std::max(change, std::abs(t - z[j]));
      z[j] = t;
      for (std::size_t i = 0; i < d; ++i) r[i] -= w.at(i, j) * z[j];
    }
    if (change < 1e-15) break;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Pruning: line-by-line transcription of the pseudocode.
//
//   measure accuracy, set target
//   for each layer l in the visit order
//     for i = n_l down to 1
//       measure accuracy
//       if accuracy <= target: break
//       else remove node i of layer l
//
// Nodes are 1-based here. Node 1 is kept so the layer never disappears.

struct Removal {
  std::size_t layer;
  std::size_t node;  // 0-based, as recorded by the library
  double accuracy;
};

inline std::vector<Removal> prune_transcription(const asymnet::Network& start, const asymnet::Dataset& target_set,
                                                const asymnet::Dataset& gate_set, double fraction,
                                                const std::vector<std::size_t>& order) {
  auto measure = [](const asymnet::Network& n, const asymnet::Dataset& d) {
    return asymnet::evaluate(n, d, asymnet::Metric::accuracy);
  };
  asymnet::Network net = start;
  const double target = fraction * measure(net, target_set);
  std::vector<Removal> out;
  for (std::size_t zeta = 0; zeta < order.size(); ++zeta) {
    const std::size_t l = order[zeta];
    const std::size_t nl = net.layer(l).output_nodes();
    for (std::size_t i = nl; i >= 2; --i) {
      const double accuracy = measure(net, gate_set);
      if (accuracy <= target) {
        break;
      } else {
        out.push_back({l, i - 1, accuracy});
        net = asymnet::remove_node(net, l, i - 1);
      }
    }
  }
  return out;
}

/// Layer order by node count, largest first, deeper layer on ties.
inline std::vector<std::size_t> visit_order(const asymnet::Network& net) {
  auto hidden = net.hidden_layers();
  std::vector<std::size_t> order(hidden.rbegin(), hidden.rend());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return net.layer(a).output_nodes() > net.layer(b).output_nodes();
  });
  return order;
}

// ---------------------------------------------------------------------------
// Central finite differences of a scalar function of a network's parameters.

/// Calls visit(layer, is_bias, index, numeric_derivative) for every parameter.
inline void finite_differences(asymnet::Network net, const std::function<double(const asymnet::Network&)>& f,
                               double h,
                               const std::function<void(std::size_t, bool, std::size_t, double)>& visit) {
  for (std::size_t l = 0; l < net.size(); ++l) {
    if (!net.layer(l).weighted()) continue;
    for (int part = 0; part < 2; ++part) {
      auto& t = part == 0 ? net.layer(l).weights : net.layer(l).bias;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double keep = t[k];
        t[k] = keep + h;
        const double up = f(net);
        t[k] = keep - h;
        const double down = f(net);
        t[k] = keep;
        visit(l, part == 1, k, (up - down) / (2.0 * h));
      }
    }
  }
}

}  // namespace oracle

namespace oracle {

// ---------------------------------------------------------------------------
// Straight-line forward pass for one sample: u = W x + b, x = s * f0(u).

inline double f0(asymnet::Activation a, double u) {
  switch (a) {
    case asymnet::Activation::relu: return u > 0 ? u : 0.0;
    case asymnet::Activation::linear: return u;
    case asymnet::Activation::tanh: return std::tanh(u);
    case asymnet::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-u));
    case asymnet::Activation::none: return u;
  }
  return u;
}

inline Tensor forward_one(const asymnet::Network& net, Tensor x) {
  using asymnet::LayerKind;
  for (const auto& l : net.layers()) {
    switch (l.kind) {
      case LayerKind::flatten:
        x = x.reshaped({x.size()});
        continue;
      case LayerKind::maxpool:
        x = pool(x).first;
        continue;
      case LayerKind::dense: {
        const auto n = l.weights.extent(0), m = l.weights.extent(1);
        Tensor u({n});
        for (std::size_t i = 0; i < n; ++i) {
          double s = l.bias[i];
          for (std::size_t j = 0; j < m; ++j) s += l.weights.at(i, j) * x[j];
          u[i] = s;
        }
        x = u;
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t pad = l.padding == asymnet::Padding::same ? l.weights.extent(2) / 2 : 0;
        x = conv(x, l.weights, pad);
        const auto per = x.size() / x.extent(0);
        for (std::size_t c = 0; c < x.extent(0); ++c) {
          for (std::size_t k = 0; k < per; ++k) x[c * per + k] += l.bias[c];
        }
        break;
      }
    }
    const auto nodes = l.weights.extent(0);
    const auto per = x.size() / nodes;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double s = l.profile ? l.profile->values[i] : 1.0;
      for (std::size_t k = 0; k < per; ++k) x[i * per + k] = s * f0(l.base, x[i * per + k]);
    }
  }
  return x;
}

/// Row `i` of a batched tensor as a per-sample tensor.
inline Tensor sample(const Tensor& batch, std::size_t i) {
  asymnet::Shape s(batch.shape().begin() + 1, batch.shape().end());
  const auto n = asymnet::shape_size(s);
  return Tensor(s, std::vector<double>(batch.data() + i * n, batch.data() + (i + 1) * n));
}

// ---------------------------------------------------------------------------
// Random small architectures for property tests.

inline asymnet::SensitivityProfile random_profile(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.05, 1.0);
  std::sort(v.rbegin(), v.rend());
  return asymnet::explicit_profile(v);
}

/// Up to three weighted layers mixing conv, pool and dense, with random
/// profiles on every hidden layer and a profile on the last layer too.
inline asymnet::Network random_network(Rng& rng, asymnet::Activation base = asymnet::Activation::relu) {
  using namespace asymnet;
  std::vector<Layer> layers;
  Shape input;
  const bool image = rng.below(2) == 0;
  std::size_t weighted = 1 + rng.below(3);
  if (image) {
    const std::size_t c = 1 + rng.below(2), h = 4 + rng.below(3), w = 4 + rng.below(3);
    input = {c, h, w};
    std::size_t ch = c;
    const std::size_t convs = std::min<std::size_t>(1 + rng.below(2), weighted);
    for (std::size_t k = 0; k < convs; ++k) {
      const std::size_t out = 1 + rng.below(3);
      const auto pad = rng.below(2) == 0 ? Padding::same : Padding::valid;
      layers.push_back(conv_layer(ch, out, pad == Padding::same ? 3 : 2, pad, base, random_profile(out, rng)));
      ch = out;
      if (rng.below(2) == 0) layers.push_back(maxpool_layer());
    }
    layers.push_back(flatten_layer());
    weighted -= convs;
  } else {
    input = {2 + rng.below(4)};
  }
  Network probe(input, layers);
  std::size_t width = probe.output_shape()[0];
  for (std::size_t k = 0; k < weighted; ++k) {
    const std::size_t out = 1 + rng.below(4);
    layers.push_back(dense_layer(width, out, base, random_profile(out, rng)));
    width = out;
  }
  Network net(input, layers);
  initialize(net, rng);
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (auto& b : net.layer(i).bias.storage()) b = rng.uniform(-0.3, 0.3);
  }
  return net;
}

}  // namespace oracle

#include "asymnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asymnet/errors.hpp"

namespace asymnet {

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

namespace {

double off_diagonal_norm(const std::vector<double>& m, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += m[i * n + j] * m[i * n + j];
  return std::sqrt(s);
}

}  // namespace

EigenResult sym_eig(const Tensor& a) {
  if (a.rank() != 2 || a.extent(0) != a.extent(1)) {
    throw ValidationError("sym_eig needs a square matrix, got " + shape_string(a.shape()));
  }
  const std::size_t n = a.extent(0);
  if (n > kMaxEigenDimension) {
    throw ValidationError("sym_eig supports at most " + std::to_string(kMaxEigenDimension) +
                          " rows, got " + std::to_string(n));
  }
  const double sym_tol = 1e-12 * std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a.at(i, j) - a.at(j, i)) > sym_tol) {
        throw ValidationError("sym_eig input is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
    }
  }

  std::vector<double> m(a.storage());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  const double target = 1e-12 * frobenius_norm(a);
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(m, n) > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (apq == 0.0) continue;
        const double app = m[p * n + p];
        const double aqq = m[q * n + q];
        // Rotation angle that zeroes m[p][q]; t is the smaller root for stability.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m[k * n + p];
          const double mkq = m[k * n + q];
          m[k * n + p] = c * mkp - s * mkq;
          m[k * n + q] = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m[p * n + k];
          const double mqk = m[q * n + k];
          m[p * n + k] = c * mpk - s * mqk;
          m[q * n + k] = s * mpk + c * mqk;
        }
        m[p * n + q] = 0.0;
        m[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return m[x * n + x] > m[y * n + y]; });

  EigenResult r{std::vector<double>(n), Tensor({n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    const auto src = order[k];
    r.values[k] = m[src * n + src];
    std::size_t lead = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v[i * n + src]) > std::abs(v[lead * n + src])) lead = i;
    const double sign = v[lead * n + src] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) r.vectors.at(i, k) = sign * v[i * n + src];
  }
  return r;
}

Tensor covariance(const Tensor& samples) {
  if (samples.rank() != 2) {
    throw DimensionError("covariance expects N x d samples, got " + shape_string(samples.shape()));
  }
  const auto n = samples.extent(0);
  const auto d = samples.extent(1);
  if (n < 2) {
    throw InsufficientSamplesError("covariance needs at least 2 samples, got " + std::to_string(n));
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);

  Tensor centered({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered.at(i, j) = samples.at(i, j) - mean[j];

  Tensor cov({d, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = centered.at(i, a);
      for (std::size_t b = a; b < d; ++b) cov.at(a, b) += xa * centered.at(i, b);
    }
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov.at(a, b) *= scale;
      cov.at(b, a) = cov.at(a, b);
    }
  }
  return cov;
}

}  // namespace asymnet

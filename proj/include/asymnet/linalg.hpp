#pragma once

#include <cstddef>
#include <vector>

#include "asymnet/tensor.hpp"

namespace asymnet {

inline constexpr std::size_t kMaxEigenDimension = 4096;

struct EigenResult {
  /// Sorted descending.
  std::vector<double> values;
  /// n x n, column k is the unit eigenvector for values[k].
  Tensor vectors;
};

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm is at most 1e-12 * ||a||_F.
/// Each eigenvector's sign is fixed so its largest-magnitude component is
/// positive. Throws ValidationError if `a` is asymmetric beyond 1e-12 per
/// entry (scaled by max(1, max|a|)) or larger than kMaxEigenDimension.
EigenResult sym_eig(const Tensor& a);

/// Unbiased sample covariance of the rows of an N x d matrix.
Tensor covariance(const Tensor& samples);

double frobenius_norm(const Tensor& a);
double max_abs(const Tensor& a);

}  // namespace asymnet

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace asymnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A default-constructed tensor is the empty tensor (rank 0, no data) and is
/// used where a layer carries no parameters. Every other tensor has positive
/// extents and exactly shape_size(shape) elements.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  void fill(double value);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor identity(std::size_t n);
Tensor transpose(const Tensor& a);

/// c[i][j] = sum_t a[i][t] * b[t][j]. Accumulation runs over t in ascending
/// order for every entry.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Padding : unsigned char { valid = 0, same = 1 };

/// Multi-channel 2-D cross-correlation (no kernel flip), stride 1.
/// input: C_in x H x W, filters: C_out x C_in x kh x kw.
/// `same` zero-pads so the output keeps H x W and requires odd kernels.
Tensor conv2d(const Tensor& input, const Tensor& filters, Padding padding);

struct PoolResult {
  Tensor output;
  /// Flat index into the input of the element that won each output window.
  std::vector<std::size_t> argmax;
};

/// 2x2 max pooling with stride 2 over a C x H x W tensor. Odd extents are
/// padded with -inf on the bottom/right, so the output is ceil(H/2) x ceil(W/2).
/// Ties go to the first element in row-major window order.
PoolResult maxpool2d(const Tensor& input);

}  // namespace asymnet

#include "asymnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "asymnet/errors.hpp"
#include "asymnet/kernels.hpp"

namespace asymnet {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_string(a.shape()));
  const auto rows = a.extent(0);
  const auto cols = a.extent(1);
  Tensor t({cols, rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor c({a.extent(0), b.extent(1)});
  kernels::gemm_nn(a.data(), b.data(), c.data(), a.extent(0), b.extent(1), a.extent(1));
  return c;
}

Tensor conv2d(const Tensor& input, const Tensor& filters, Padding padding) {
  if (input.rank() != 3 || filters.rank() != 4) {
    throw DimensionError("conv2d expects C x H x W input and Cout x Cin x kh x kw filters, got " +
                         shape_string(input.shape()) + " and " + shape_string(filters.shape()));
  }
  if (filters.extent(1) != input.extent(0)) {
    throw DimensionError("conv2d channel mismatch: input " + shape_string(input.shape()) +
                         ", filters " + shape_string(filters.shape()));
  }
  const auto g = kernels::conv_geometry(input.extent(0), input.extent(1), input.extent(2),
                                        filters.extent(2), filters.extent(3), padding);
  const auto c_out = filters.extent(0);
  std::vector<double> cols(g.patch() * g.positions());
  kernels::im2col(input.data(), g, cols.data());
  Tensor out({c_out, g.out_h(), g.out_w()});
  kernels::gemm_nn(filters.data(), cols.data(), out.data(), c_out, g.positions(), g.patch());
  return out;
}

PoolResult maxpool2d(const Tensor& input) {
  if (input.rank() != 3) {
    throw DimensionError("maxpool2d expects C x H x W, got " + shape_string(input.shape()));
  }
  const auto channels = input.extent(0);
  const auto h = input.extent(1);
  const auto w = input.extent(2);
  const auto oh = (h + 1) / 2;
  const auto ow = (w + 1) / 2;
  PoolResult r{Tensor({channels, oh, ow}), std::vector<std::size_t>(channels * oh * ow)};
  std::size_t o = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_index = (c * h + 2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          const auto row = 2 * i + di;
          if (row >= h) continue;
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const auto col = 2 * j + dj;
            if (col >= w) continue;
            const auto idx = (c * h + row) * w + col;
            if (input[idx] > best) {
              best = input[idx];
              best_index = idx;
            }
          }
        }
        r.output[o] = best;
        r.argmax[o] = best_index;
      }
    }
  }
  return r;
}

namespace kernels {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* __restrict brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* __restrict crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, n, k);
}

ConvGeometry conv_geometry(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t kernel_h, std::size_t kernel_w, Padding padding) {
  ConvGeometry g{channels, height, width, kernel_h, kernel_w, 0, 0};
  if (padding == Padding::same) {
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
      throw DimensionError("same padding needs odd kernel extents, got " +
                           std::to_string(kernel_h) + "x" + std::to_string(kernel_w));
    }
    g.pad_h = kernel_h / 2;
    g.pad_w = kernel_w / 2;
  } else if (kernel_h > height || kernel_w > width) {
    throw DimensionError("kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                         " larger than input " + std::to_string(height) + "x" +
                         std::to_string(width) + " under valid padding");
  }
  return g;
}

void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const auto oh = g.out_h();
  const auto ow = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        double* out = cols + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          // Signed arithmetic: the padded source row may sit above the image.
          const auto src_i = static_cast<std::ptrdiff_t>(i + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
          for (std::size_t j = 0; j < ow; ++j) {
            const auto src_j =
                static_cast<std::ptrdiff_t>(j + kj) - static_cast<std::ptrdiff_t>(g.pad_w);
            const bool inside = src_i >= 0 && src_j >= 0 &&
                                src_i < static_cast<std::ptrdiff_t>(g.height) &&
                                src_j < static_cast<std::ptrdiff_t>(g.width);
            out[i * ow + j] =
                inside ? image[(c * g.height + static_cast<std::size_t>(src_i)) * g.width +
                               static_cast<std::size_t>(src_j)]
                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* image) {
  const auto oh = g.out_h();
  const auto ow = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        const double* in = cols + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const auto src_i = static_cast<std::ptrdiff_t>(i + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (src_i < 0 || src_i >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t j = 0; j < ow; ++j) {
            const auto src_j =
                static_cast<std::ptrdiff_t>(j + kj) - static_cast<std::ptrdiff_t>(g.pad_w);
            if (src_j < 0 || src_j >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(src_i)) * g.width +
                  static_cast<std::size_t>(src_j)] += in[i * ow + j];
          }
        }
      }
    }
  }
}

}  // namespace kernels

}  // namespace asymnet

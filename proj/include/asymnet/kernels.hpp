#pragma once

// Raw-pointer building blocks shared by tensor.cpp and the layer code. All
// matrices are row-major; callers own shape checking.

#include <cstddef>

#include "asymnet/tensor.hpp"

namespace asymnet::kernels {

/// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);

/// c[m x n] += a^T * b with a stored k x m and b stored k x n.
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);

/// c[m x n] += a * b^T with a stored m x k and b stored n x k.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);

struct ConvGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;

  std::size_t out_h() const { return height + 2 * pad_h - kernel_h + 1; }
  std::size_t out_w() const { return width + 2 * pad_w - kernel_w + 1; }
  std::size_t patch() const { return channels * kernel_h * kernel_w; }
  std::size_t positions() const { return out_h() * out_w(); }
};

ConvGeometry conv_geometry(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t kernel_h, std::size_t kernel_w, Padding padding);

/// Unfolds one C x H x W image into a patch() x positions() matrix.
void im2col(const double* image, const ConvGeometry& g, double* cols);

/// Adjoint of im2col: accumulates columns back into a C x H x W image.
void col2im(const double* cols, const ConvGeometry& g, double* image);

}  // namespace asymnet::kernels

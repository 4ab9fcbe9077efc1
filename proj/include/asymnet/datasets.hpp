#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asymnet/tensor.hpp"

namespace asymnet {

/// Paired samples with a leading batch extent. Classification targets are
/// one-hot rows; auto-associative targets equal the inputs.
struct Dataset {
  Tensor inputs;
  Tensor targets;
  std::string tag;

  std::size_t size() const { return inputs.empty() ? 0 : inputs.extent(0); }
  Shape sample_shape() const;
  Shape target_shape() const;

  /// Rows [first, first + count) as a batch pair.
  Dataset slice(std::size_t first, std::size_t count) const;
  /// Rows in the given order.
  Dataset gather(const std::vector<std::size_t>& rows) const;

  bool operator==(const Dataset&) const = default;
};

/// Throws ValidationError on N mismatch or a target row that is not one-hot
/// when `one_hot` is set.
void validate_dataset(const Dataset& d, bool one_hot);

Tensor one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes);
/// argmax of each target row.
std::vector<std::size_t> labels_of(const Tensor& targets);

/// Zero-mean Gaussian samples x = F z with F F^T = covariance (eigen factor,
/// so singular PSD matrices work). Targets equal inputs.
Dataset gaussian_correlated(std::size_t n_samples, const Tensor& covariance, std::uint64_t seed);

/// The two-correlated-plus-one-tiny 3-D covariance used by the shallow
/// alignment experiments: [[1,.9,0],[.9,1,0],[0,0,1e-4]].
Tensor reference_gaussian_covariance();

/// IDX image/label pair (gzip or plain). Pixels scaled to [0,1], labels one-hot
/// width 10, inputs shaped N x 1 x rows x cols.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batches (1 label byte + 3072 pixel bytes per record).
/// Inputs N x 3 x 32 x 32 in [0,1]; labels one-hot width 10.
Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& paths);

/// Deterministic shuffled partition. Fractions must be positive and sum to 1
/// (within 1e-9); part k gets floor(f_k N) rows and the last part the rest.
std::vector<Dataset> split(const Dataset& d, const std::vector<double>& fractions, std::uint64_t seed);

/// First n rows after a seeded shuffle.
Dataset subset(const Dataset& d, std::size_t n, std::uint64_t seed);

/// Reshapes inputs to N x prod(sample shape).
Dataset flattened(const Dataset& d);
/// Auto-associative view: targets become the (flattened) inputs.
Dataset autoassociative(const Dataset& d);

/// Binary cache format: "ASDS" u32 version, then inputs, targets, tag.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace asymnet

#include "asymnet/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include "asymnet/errors.hpp"
#include "asymnet/linalg.hpp"
#include "asymnet/rng.hpp"

namespace asymnet {

Shape Dataset::sample_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }

Shape Dataset::target_shape() const { return Shape(targets.shape().begin() + 1, targets.shape().end()); }

namespace {

Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t row = t.size() / t.extent(0);
  Shape s = t.shape();
  s[0] = rows.size();
  std::vector<double> data(rows.size() * row);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.extent(0)) throw IndexError("row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(t.data() + rows[i] * row, row, data.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  return Tensor(std::move(s), std::move(data));
}

}  // namespace

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > size() || count == 0) {
    throw IndexError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") outside dataset of " + std::to_string(size()));
  }
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), first);
  return gather(rows);
}

Dataset Dataset::gather(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) throw ValidationError("cannot gather an empty row set");
  return Dataset{take_rows(inputs, rows), take_rows(targets, rows), tag};
}

void validate_dataset(const Dataset& d, bool one_hot_targets) {
  if (d.inputs.empty() || d.targets.empty()) throw ValidationError("dataset is empty");
  if (d.inputs.extent(0) != d.targets.extent(0)) {
    throw ValidationError("dataset has " + std::to_string(d.inputs.extent(0)) + " inputs but " +
                          std::to_string(d.targets.extent(0)) + " targets");
  }
  if (!one_hot_targets) return;
  const std::size_t width = d.targets.size() / d.targets.extent(0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double v = d.targets[i * width + j];
      if (v != 0.0 && v != 1.0) throw ValidationError("target row " + std::to_string(i) + " is not one-hot");
      sum += v;
    }
    if (sum != 1.0) throw ValidationError("target row " + std::to_string(i) + " does not sum to 1");
  }
}

Tensor one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw FormatError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " outside 0.." + std::to_string(classes - 1));
    }
    t.at(i, labels[i]) = 1.0;
  }
  return t;
}

std::vector<std::size_t> labels_of(const Tensor& targets) {
  const std::size_t n = targets.extent(0);
  const std::size_t width = targets.size() / n;
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = targets.data() + i * width;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + width) - row);
  }
  return out;
}

Tensor reference_gaussian_covariance() {
  return Tensor({3, 3}, {1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1e-4});
}

Dataset gaussian_correlated(std::size_t n_samples, const Tensor& cov, std::uint64_t seed) {
  if (n_samples == 0) throw ValidationError("gaussian_correlated needs at least one sample");
  const auto eig = sym_eig(cov);
  const std::size_t d = eig.values.size();
  const double tol = 1e-10 * std::max(1.0, max_abs(cov));
  Tensor factor({d, d});
  for (std::size_t k = 0; k < d; ++k) {
    if (eig.values[k] < -tol) {
      throw ValidationError("covariance is not positive semidefinite (eigenvalue " +
                            std::to_string(eig.values[k]) + ")");
    }
    const double root = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < d; ++i) factor.at(i, k) = eig.vectors.at(i, k) * root;
  }
  Rng rng(seed);
  Tensor x({n_samples, d});
  std::vector<double> z(d);
  for (std::size_t n = 0; n < n_samples; ++n) {
    for (auto& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += factor.at(i, k) * z[k];
      x.at(n, i) = acc;
    }
  }
  return Dataset{x, x, "gaussian"};
}

namespace {

struct GzCloser {
  void operator()(gzFile f) const {
    if (f) gzclose(f);
  }
};

// Reads a whole file; gzip streams are inflated, plain files pass through.
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::unique_ptr<gzFile_s, GzCloser> f(gzopen(path.string().c_str(), "rb"));
  if (!f) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f.get(), buf, sizeof buf);
    if (n < 0) throw FormatError("read error in " + path.string());
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  return out;
}

std::uint32_t big_endian_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lbl = read_all(labels);
  if (img.size() < 16) throw FormatError(images.string() + ": truncated IDX header");
  if (lbl.size() < 8) throw FormatError(labels.string() + ": truncated IDX header");
  if (big_endian_u32(img, 0) != 0x00000803) throw FormatError(images.string() + ": bad IDX image magic");
  if (big_endian_u32(lbl, 0) != 0x00000801) throw FormatError(labels.string() + ": bad IDX label magic");
  const std::size_t n = big_endian_u32(img, 4);
  const std::size_t rows = big_endian_u32(img, 8);
  const std::size_t cols = big_endian_u32(img, 12);
  const std::size_t n_labels = big_endian_u32(lbl, 4);
  if (n == 0 || rows == 0 || cols == 0) throw FormatError(images.string() + ": empty IDX image set");
  if (n != n_labels) {
    throw FormatError("IDX image count " + std::to_string(n) + " != label count " + std::to_string(n_labels));
  }
  if (img.size() < 16 + n * rows * cols) throw FormatError(images.string() + ": truncated pixel data");
  if (lbl.size() < 8 + n) throw FormatError(labels.string() + ": truncated label data");

  Tensor x({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) x[i] = static_cast<double>(img[16 + i]) / 255.0;
  std::vector<std::uint8_t> y(lbl.begin() + 8, lbl.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] > 9) throw FormatError(labels.string() + ": label " + std::to_string(y[i]) + " out of 0-9");
  }
  return Dataset{std::move(x), one_hot(y, 10), "mnist"};
}

Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& paths) {
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  if (paths.empty()) throw ValidationError("load_cifar10_bin needs at least one file");
  std::vector<std::uint8_t> all;
  for (const auto& p : paths) {
    auto bytes = read_all(p);
    if (bytes.empty() || bytes.size() % kRecord != 0) {
      throw FormatError(p.string() + ": length " + std::to_string(bytes.size()) +
                        " is not a multiple of " + std::to_string(kRecord));
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  const std::size_t n = all.size() / kRecord;
  Tensor x({n, 3, 32, 32});
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = all.data() + i * kRecord;
    y[i] = rec[0];
    if (y[i] > 9) throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label " + std::to_string(y[i]));
    for (std::size_t k = 0; k < kRecord - 1; ++k) x[i * (kRecord - 1) + k] = static_cast<double>(rec[1 + k]) / 255.0;
  }
  return Dataset{std::move(x), one_hot(y, 10), "cifar10"};
}

std::vector<Dataset> split(const Dataset& d, const std::vector<double>& fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ValidationError("split needs at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValidationError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
  const std::size_t n = d.size();
  Rng rng(seed);
  const auto order = rng.permutation(n);
  std::vector<Dataset> parts;
  std::size_t start = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const std::size_t count = k + 1 == fractions.size()
                                  ? n - start
                                  : static_cast<std::size_t>(std::floor(fractions[k] * static_cast<double>(n)));
    if (count == 0) throw ValidationError("split part " + std::to_string(k) + " would be empty");
    std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(start + count));
    parts.push_back(d.gather(rows));
    start += count;
  }
  return parts;
}

Dataset subset(const Dataset& d, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > d.size()) {
    throw ValidationError("subset of " + std::to_string(n) + " from " + std::to_string(d.size()) + " samples");
  }
  Rng rng(seed);
  auto order = rng.permutation(d.size());
  order.resize(n);
  return d.gather(order);
}

Dataset flattened(const Dataset& d) {
  const std::size_t n = d.size();
  return Dataset{d.inputs.reshaped({n, d.inputs.size() / n}), d.targets, d.tag};
}

Dataset autoassociative(const Dataset& d) {
  auto f = flattened(d);
  f.targets = f.inputs;
  return f;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("dataset cache truncated");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

void put_tensor(std::ofstream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : t.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b, 8);
  }
}

Tensor get_tensor(std::ifstream& in) {
  const auto rank = get_u32(in);
  if (rank == 0 || rank > 8) throw FormatError("dataset cache has implausible rank");
  Shape s(rank);
  for (auto& e : s) e = get_u32(in);
  std::vector<double> data(shape_size(s));
  for (auto& v : data) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw FormatError("dataset cache truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(s), std::move(data));
}

}  // namespace

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write("ASDS", 4);
  put_u32(out, 1);
  put_tensor(out, d.inputs);
  put_tensor(out, d.targets);
  put_u32(out, static_cast<std::uint32_t>(d.tag.size()));
  out.write(d.tag.data(), static_cast<std::streamsize>(d.tag.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "ASDS") throw FormatError(path.string() + ": not a dataset cache");
  if (get_u32(in) != 1) throw FormatError(path.string() + ": unsupported dataset cache version");
  Dataset d;
  d.inputs = get_tensor(in);
  d.targets = get_tensor(in);
  const auto len = get_u32(in);
  d.tag.resize(len);
  in.read(d.tag.data(), len);
  if (!in) throw FormatError("dataset cache truncated");
  return d;
}

}  // namespace asymnet

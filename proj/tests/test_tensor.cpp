#include <doctest.h>

#include <cmath>
#include <string>

#include "asymnet/datasets.hpp"
#include "asymnet/errors.hpp"
#include "asymnet/linalg.hpp"
#include "asymnet/rng.hpp"
#include "asymnet/tensor.hpp"
#include "oracles.hpp"

using namespace asymnet;

TEST_CASE("tensor construction checks extents") {
  CHECK_THROWS_AS(Tensor(Shape{}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>(3)), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.all_finite());
  t[4] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK(Tensor().empty());
  CHECK_THROWS_AS(Tensor({2, 3}).reshaped({4}), DimensionError);
}

TEST_CASE("matmul") {
  SUBCASE("identity") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(identity(2), a) == a);
    CHECK(matmul(a, identity(2)) == a);
  }
  SUBCASE("projector") {
    Tensor p({2, 2}, {1, 0, 0, 0});
    Tensor v({2, 1}, {5, 7});
    CHECK(matmul(p, v) == Tensor({2, 1}, {5, 0}));
  }
  SUBCASE("matches triple loop exactly") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const auto m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
      auto a = oracle::random_tensor({m, k}, rng);
      auto b = oracle::random_tensor({k, n}, rng);
      CHECK(matmul(a, b) == oracle::matmul(a, b));
    }
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(Tensor({2, 3}), Tensor({2, 3}));
      FAIL("no throw");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
    }
  }
}

TEST_CASE("transpose") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(transpose(a) == Tensor({3, 2}, {1, 4, 2, 5, 3, 6}));
  CHECK(transpose(transpose(a)) == a);
}

TEST_CASE("conv2d") {
  SUBCASE("scalar filter doubles") {
    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto y = conv2d(x, Tensor({1, 1, 1, 1}, 2.0), Padding::valid);
    for (std::size_t i = 0; i < 9; ++i) CHECK(y[i] == 2.0 * x[i]);
  }
  SUBCASE("box sum") {
    auto y = conv2d(Tensor({1, 4, 4}, 1.0), Tensor({1, 1, 3, 3}, 1.0), Padding::valid);
    CHECK(y.shape() == Shape{1, 2, 2});
    for (double v : y.values()) CHECK(v == 9.0);
  }
  SUBCASE("one-hot filter shifts the input") {
    Rng rng(3);
    auto x = oracle::random_tensor({1, 6, 5}, rng);
    Tensor f({1, 1, 3, 3});
    f[1 * 3 + 2] = 1.0;  // row 1, col 2
    auto y = conv2d(x, f, Padding::valid);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(y.at(0, r, c) == x.at(0, r + 1, c + 2));
    }
  }
  SUBCASE("matches direct loops") {
    Rng rng(5);
    auto x = oracle::random_tensor({2, 5, 5}, rng);
    auto f = oracle::random_tensor({3, 2, 3, 3}, rng);
    for (auto [pad, mode] : {std::pair{std::size_t{0}, Padding::valid}, std::pair{std::size_t{1}, Padding::same}}) {
      auto got = conv2d(x, f, mode);
      auto want = oracle::conv(x, f, pad);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), Padding::valid), DimensionError);
    CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 2, 2}), Padding::same), DimensionError);
    CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 1, 3, 3}), Padding::valid), DimensionError);
  }
}

TEST_CASE("maxpool2d") {
  SUBCASE("single window") {
    auto r = maxpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}));
    CHECK(r.output[0] == 4.0);
    CHECK(r.argmax[0] == 3);
  }
  SUBCASE("ties go to the first element") {
    auto r = maxpool2d(Tensor({1, 4, 4}, 7.0));
    CHECK(r.argmax == std::vector<std::size_t>{0, 2, 8, 10});
    for (double v : r.output.values()) CHECK(v == 7.0);
  }
  SUBCASE("matches window scan, odd extents padded") {
    Rng rng(8);
    for (auto shape : {Shape{1, 6, 6}, Shape{2, 5, 7}}) {
      auto x = oracle::random_tensor(shape, rng);
      auto got = maxpool2d(x);
      auto [want, idx] = oracle::pool(x);
      CHECK(got.output == want);
      CHECK(got.argmax == idx);
    }
  }
}

TEST_CASE("sym_eig") {
  SUBCASE("identity") {
    auto r = sym_eig(identity(3));
    CHECK(r.values == std::vector<double>{1, 1, 1});
  }
  SUBCASE("diagonal") {
    auto r = sym_eig(Tensor({2, 2}, {1, 0, 0, 3}));
    CHECK(r.values[0] == doctest::Approx(3.0));
    CHECK(r.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(r.vectors.at(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(r.vectors.at(0, 1)) == doctest::Approx(1.0));
  }
  SUBCASE("asymmetric input rejected") {
    CHECK_THROWS_AS(sym_eig(Tensor({2, 2}, {1, 2, 0, 1})), ValidationError);
  }
  SUBCASE("reconstruction, orthonormality and residuals") {
    Rng rng(21);
    for (std::size_t n : {1u, 2u, 5u, 17u, 64u}) {
      auto a = oracle::random_symmetric(n, rng);
      auto r = sym_eig(a);
      const double scale = max_abs(a);
      for (std::size_t k = 0; k + 1 < n; ++k) CHECK(r.values[k] >= r.values[k + 1]);
      auto vtv = matmul(transpose(r.vectors), r.vectors);
      Tensor lam({n, n});
      for (std::size_t k = 0; k < n; ++k) lam.at(k, k) = r.values[k];
      auto rec = matmul(matmul(r.vectors, lam), transpose(r.vectors));
      double orth = 0, recon = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          orth = std::max(orth, std::abs(vtv.at(i, j) - (i == j ? 1.0 : 0.0)));
          recon = std::max(recon, std::abs(rec.at(i, j) - a.at(i, j)));
        }
      }
      CHECK(orth <= 1e-10);
      CHECK(recon <= 1e-8 * scale);
    }
  }
  SUBCASE("eigenvalues equal characteristic polynomial roots") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
      auto a = oracle::random_symmetric(4, rng);
      auto got = sym_eig(a).values;
      auto want = oracle::eigenvalues(a);
      REQUIRE(want.size() == 4);
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-8);
    }
  }
}

TEST_CASE("covariance") {
  CHECK_THROWS_AS(covariance(Tensor({1, 2})), InsufficientSamplesError);
  CHECK(covariance(Tensor({2, 3}, {1, 2, 3, 1, 2, 3})) == Tensor({3, 3}));
  CHECK(covariance(Tensor({2, 2}, {1, 0, -1, 0})) == Tensor({2, 2}, {2, 0, 0, 0}));
  auto d = gaussian_correlated(2048, reference_gaussian_covariance(), 1);
  auto c = covariance(d.inputs);
  CHECK(std::abs(c.at(0, 1) - 0.9) <= 0.05);
  CHECK(c.at(0, 1) == c.at(1, 0));
}

TEST_CASE("rng is reproducible") {
  Rng a(99), b(99), c(100);
  bool same = true;
  for (int i = 0; i < 1000000; ++i) same = same && a.next_u64() == b.next_u64();
  CHECK(same);
  CHECK(Rng(99).next_u64() != c.next_u64());
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
    CHECK(u.below(7) < 7);
  }
  auto p = Rng(5).permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(p[i] == i);
  CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
  CHECK(Rng::derive(1, 2) == Rng::derive(1, 2));
}

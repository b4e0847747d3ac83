#include "doctest.h"

#include "thintube/numerics.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace thintube::numerics;

namespace {

TridiagonalMatrix laplacian_1d(std::size_t n, double step) {
  TridiagonalMatrix t;
  t.diag.assign(n, 2.0 / (step * step));
  t.offdiag.assign(n - 1, -1.0 / (step * step));
  return t;
}

SparseSymmetric laplacian_2d(std::size_t m, double step) {
  SparseSymmetric a(m * m);
  const double w = 1.0 / (step * step);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t p = i * m + j;
      a.add(p, p, 4.0 * w);
      if (i + 1 < m) a.add(p, p + m, -w);
      if (j + 1 < m) a.add(p, p + 1, -w);
    }
  }
  a.compress();
  return a;
}

// Random sparse symmetric positive definite matrix: banded random couplings
// plus a dominant diagonal.
SparseSymmetric random_spd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  SparseSymmetric a(n);
  std::vector<double> rowsum(n, 0.0);
  for (std::size_t k = 0; k < 4 * n; ++k) {
    std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const double v = u(rng);
    a.add(i, j, v);
    rowsum[i] += std::abs(v);
    rowsum[j] += std::abs(v);
  }
  for (std::size_t i = 0; i < n; ++i) a.add(i, i, rowsum[i] + 0.5 + 3.0 * (u(rng) + 1.0));
  a.compress();
  return a;
}

}  // namespace

TEST_CASE("tridiag_smallest: 2x2 closed form") {
  TridiagonalMatrix t{{2.0, 2.0}, {-1.0}};
  const auto pairs = tridiag_smallest(t, 2);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pairs[1].value == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(pairs[0].vector[0]) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("tridiag_smallest: FD Dirichlet Laplacian matches closed form") {
  const std::size_t n = 50;
  const double step = std::numbers::pi / static_cast<double>(n + 1);
  const auto t = laplacian_1d(n, step);
  const auto pairs = tridiag_smallest(t, 5);
  for (std::size_t k = 1; k <= 5; ++k) {
    const double exact = 2.0 / (step * step) * (1.0 - std::cos(static_cast<double>(k) * step));
    CHECK(std::abs(pairs[k - 1].value - exact) <= 1e-10);
    CHECK(pairs[k - 1].residual <= kDefaultTolerance);
    const auto tx = t.multiply(pairs[k - 1].vector);
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) r2 += std::pow(tx[i] - pairs[k - 1].value * pairs[k - 1].vector[i], 2);
    CHECK(std::sqrt(r2) <= kDefaultTolerance);
  }
}

TEST_CASE("tridiag_smallest: constant potential shifts the spectrum") {
  const std::size_t n = 50;
  const double step = std::numbers::pi / static_cast<double>(n + 1);
  auto t = laplacian_1d(n, step);
  const auto base = tridiag_smallest(t, 5);
  const double w0 = 3.75;
  for (double& d : t.diag) d += w0;
  const auto shifted = tridiag_smallest(t, 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(shifted[k].value - base[k].value == doctest::Approx(w0).epsilon(1e-12));
}

TEST_CASE("tridiag_smallest: agrees with the dense fallback on random matrices") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::size_t n = 20 + 30 * seed;
    TridiagonalMatrix t;
    t.diag.resize(n);
    t.offdiag.resize(n - 1);
    for (double& d : t.diag) d = 10.0 * u(rng);
    for (double& e : t.offdiag) e = u(rng);
    const auto pairs = tridiag_smallest(t, 6);
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      dense[i * n + i] = t.diag[i];
      if (i + 1 < n) dense[i * n + i + 1] = dense[(i + 1) * n + i] = t.offdiag[i];
    }
    const auto oracle = dense_eigenpairs(dense, n);
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(pairs[k].value == doctest::Approx(oracle[k].value).epsilon(1e-8));
      if (k > 0) CHECK(pairs[k].value >= pairs[k - 1].value);
    }
  }
}

TEST_CASE("tridiag_smallest: degenerate (decoupled) blocks report every copy") {
  // Two identical decoupled 2x2 blocks: eigenvalues 1, 1, 3, 3.
  TridiagonalMatrix t{{2.0, 2.0, 2.0, 2.0}, {-1.0, 0.0, -1.0}};
  const auto pairs = tridiag_smallest(t, 4);
  CHECK(pairs[0].value == doctest::Approx(1.0));
  CHECK(pairs[1].value == doctest::Approx(1.0));
  CHECK(pairs[2].value == doctest::Approx(3.0));
  double overlap = 0.0;
  for (std::size_t i = 0; i < 4; ++i) overlap += pairs[0].vector[i] * pairs[1].vector[i];
  CHECK(std::abs(overlap) < 1e-10);
}

TEST_CASE("tridiag_smallest: argument and convergence errors") {
  TridiagonalMatrix t{{2.0, 2.0}, {-1.0}};
  CHECK_THROWS_AS(tridiag_smallest(t, 3), std::invalid_argument);
  TridiagonalMatrix bad{{2.0, 2.0}, {}};
  CHECK_THROWS_AS(tridiag_smallest(bad, 1), std::invalid_argument);
  const auto big = laplacian_1d(400, 1e-3);
  try {
    tridiag_smallest(big, 1, 1e-300);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.best_residual() > 0.0);
  }
}

TEST_CASE("sparse_smallest: diagonal matrix") {
  SparseSymmetric a(3);
  a.add(0, 0, 1.0);
  a.add(1, 1, 2.0);
  a.add(2, 2, 3.0);
  const auto pairs = sparse_smallest(a, 2);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pairs[1].value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(pairs[0].vector[0]) == doctest::Approx(1.0));
  CHECK(std::abs(pairs[1].vector[1]) == doctest::Approx(1.0));
}

TEST_CASE("sparse_smallest: 2D Dirichlet Laplacian on the unit square") {
  const std::size_t m = 40;
  const double step = 1.0 / static_cast<double>(m + 1);
  auto a = laplacian_2d(m, step);
  const auto pairs = sparse_smallest(a, 3, 1e-8);
  const double ref = 2.0 * std::numbers::pi * std::numbers::pi;
  CHECK(std::abs(pairs[0].value - ref) / ref < 0.005);
  // Mode (1,2) and (2,1) are degenerate; both copies must come back.
  CHECK(pairs[1].value == doctest::Approx(pairs[2].value).epsilon(1e-10));
  double overlap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) overlap += pairs[1].vector[i] * pairs[2].vector[i];
  CHECK(std::abs(overlap) < 1e-8);

  // Uniform mass 2 halves every eigenvalue.
  a.set_mass(std::vector<double>(a.size(), 2.0));
  const auto halved = sparse_smallest(a, 3, 1e-8);
  for (std::size_t k = 0; k < 3; ++k) CHECK(halved[k].value == doctest::Approx(0.5 * pairs[k].value).epsilon(1e-12));
  for (const auto& p : halved) CHECK(residual_norm(a, p.value, p.vector) <= 1e-8);
}

TEST_CASE("sparse_smallest: matches the dense fallback on matrices up to n=300") {
  for (std::size_t n : {7u, 40u, 123u, 300u}) {
    auto a = random_spd(n, n);
    for (bool with_mass : {false, true}) {
      if (with_mass) {
        std::vector<double> mass(n);
        for (std::size_t i = 0; i < n; ++i) mass[i] = 0.5 + static_cast<double>(i % 7) * 0.25;
        a.set_mass(mass);
      }
      const std::size_t count = std::min<std::size_t>(4, n);
      const auto pairs = sparse_smallest(a, count);
      const auto dense = a.to_dense();
      const auto oracle = dense_eigenpairs(dense, n, a.mass() ? std::span<const double>(*a.mass()) : std::span<const double>{});
      for (std::size_t k = 0; k < count; ++k) {
        CHECK(std::abs(pairs[k].value - oracle[k].value) <= 1e-8 * std::abs(oracle[k].value));
        CHECK(pairs[k].residual <= kDefaultTolerance);
        CHECK(residual_norm(a, pairs[k].value, pairs[k].vector) <= kDefaultTolerance);
        // B-normalized
        const auto bx = a.apply_mass(pairs[k].vector);
        double nb = 0.0;
        for (std::size_t i = 0; i < n; ++i) nb += bx[i] * pairs[k].vector[i];
        CHECK(std::abs(nb - 1.0) < 1e-10);
      }
    }
  }
}

TEST_CASE("sparse_smallest: shift invariance") {
  auto a = random_spd(150, 99);
  const auto base = sparse_smallest(a, 3);
  const double sigma = 2.5;
  for (std::size_t i = 0; i < a.size(); ++i) a.add(i, i, sigma);
  a.compress();
  const auto shifted = sparse_smallest(a, 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(shifted[k].value - base[k].value == doctest::Approx(sigma).epsilon(1e-9));
}

TEST_CASE("sparse_smallest: indefinite input falls back to a Gershgorin shift") {
  auto a = random_spd(60, 5);
  for (std::size_t i = 0; i < a.size(); ++i) a.add(i, i, -20.0);
  a.compress();
  const auto pairs = sparse_smallest(a, 2);
  const auto oracle = dense_eigenpairs(a.to_dense(), a.size());
  CHECK(pairs[0].value == doctest::Approx(oracle[0].value).epsilon(1e-8));
  CHECK(pairs[1].value == doctest::Approx(oracle[1].value).epsilon(1e-8));
}

TEST_CASE("sparse_smallest: argument errors") {
  SparseSymmetric a(2);
  a.add(0, 0, 1.0);
  a.add(1, 1, 1.0);
  CHECK_THROWS_AS(sparse_smallest(a, 3), std::invalid_argument);
  CHECK_THROWS_AS(a.set_mass({1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(a.set_mass({1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("fit_rate: exact power laws") {
  const std::vector<std::pair<double, double>> sq{{0.1, 0.01}, {0.05, 0.0025}, {0.025, 0.000625}};
  const auto fit = fit_rate(sq);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  const double c = 3.7;
  std::vector<std::pair<double, double>> p15;
  for (double e : {0.1, 0.05, 0.025}) p15.emplace_back(e, c * std::pow(e, 1.5));
  CHECK(fit_rate(p15).slope == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("fit_rate: 1% multiplicative noise keeps the slope within 0.1") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  for (double order : {1.0, 1.5, 2.0}) {
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 5; ++k) {
      const double e = 0.2 / std::pow(2.0, k);
      pts.emplace_back(e, 0.8 * std::pow(e, order) * (1.0 + noise(rng)));
    }
    CHECK(std::abs(fit_rate(pts).slope - order) < 0.1);
  }
}

TEST_CASE("fit_rate: argument errors") {
  const std::vector<std::pair<double, double>> two{{0.1, 0.01}, {0.05, 0.0025}};
  CHECK_THROWS_AS(fit_rate(two), std::invalid_argument);
  const std::vector<std::pair<double, double>> zero{{0.1, 0.01}, {0.05, 0.0}, {0.025, 1e-4}};
  CHECK_THROWS_AS(fit_rate(zero), std::invalid_argument);
  const std::vector<std::pair<double, double>> dup{{0.1, 0.01}, {0.1, 0.02}, {0.025, 1e-4}};
  CHECK_THROWS_AS(fit_rate(dup), std::invalid_argument);
}

TEST_CASE("richardson and empirical order recover a known expansion") {
  // a(h) = 5 + 2 h^2 + h^3
  const auto f = [](double h) { return 5.0 + 2.0 * h * h + h * h * h; };
  const auto p = empirical_order(f(0.04), f(0.02), f(0.01), 2.0);
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(2.0).epsilon(0.05));
  CHECK(richardson(f(0.02), f(0.01), 2.0, 2.0) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK_FALSE(empirical_order(1.0, 2.0, 1.0, 2.0).has_value());
}

TEST_CASE("trapezoid weights integrate linear functions exactly") {
  const auto w = trapezoid_weights(11, 0.1);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * (0.1 * static_cast<double>(i));
  CHECK(s == doctest::Approx(0.5).epsilon(1e-14));
}

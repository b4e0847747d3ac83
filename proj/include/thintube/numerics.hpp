#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thintube::numerics {

/// Raised when an iterative solver exhausts its budget. Carries the best
/// residual reached so callers can report how far off the solve was.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

struct TridiagonalMatrix {
  std::vector<double> diag;
  std::vector<double> offdiag;  // length size() - 1

  std::size_t size() const { return diag.size(); }
  /// Throws std::invalid_argument on a length mismatch or a non-finite entry.
  void validate() const;
  std::vector<double> multiply(std::span<const double> x) const;
};

/// Upper-triangle coordinate storage of a symmetric matrix, with an optional
/// diagonal mass matrix for generalized problems A x = lambda B x.
///
/// Entries may be added in any order and with duplicates; `compress()`
/// sorts and merges them. Entries with row > col are mirrored on insert.
class SparseSymmetric {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseSymmetric() = default;
  explicit SparseSymmetric(std::size_t n) : n_(n) {}

  std::size_t size() const { return n_; }
  void add(std::size_t row, std::size_t col, double value);
  void compress();

  const std::vector<Entry>& entries() const { return entries_; }
  bool compressed() const { return compressed_; }

  void set_mass(std::vector<double> mass_diag);
  const std::optional<std::vector<double>>& mass() const { return mass_; }

  /// y = A x, using both triangles.
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> apply_mass(std::span<const double> x) const;
  /// max_i sum_j |a_ij|
  double norm_inf() const;
  /// Row-major dense copy; intended for small oracle checks.
  std::vector<double> to_dense() const;

 private:
  std::size_t n_ = 0;
  std::vector<Entry> entries_;
  std::optional<std::vector<double>> mass_;
  bool compressed_ = true;
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;
  double residual = 0.0;  // ||A x - lambda B x|| / ||x||_B
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  bool operator==(const RateFit&) const = default;
};

inline constexpr double kDefaultTolerance = 1e-9;

/// Smallest `count` eigenpairs of a symmetric tridiagonal matrix.
/// Sturm-sequence bisection for the values, inverse iteration for vectors;
/// vectors of clustered eigenvalues are orthogonalized against each other.
std::vector<EigenPair> tridiag_smallest(const TridiagonalMatrix& t, std::size_t count,
                                        double tol = kDefaultTolerance);

/// Number of eigenvalues of `t` strictly below `x`.
std::size_t sturm_count(const TridiagonalMatrix& t, double x);

/// Smallest `count` eigenpairs of A (or of A x = lambda B x when A carries a
/// mass diagonal) by block Lanczos on (A - sigma B)^{-1} with full
/// reorthogonalization. sigma = 0 for positive definite A, otherwise a
/// Gershgorin lower bound. `iter_cap == 0` selects 50 * count * sqrt(n)
/// operator applications.
std::vector<EigenPair> sparse_smallest(const SparseSymmetric& a, std::size_t count,
                                       double tol = kDefaultTolerance,
                                       std::size_t iter_cap = 0);

/// Dense symmetric fallback (cyclic Jacobi). `a` is row-major n x n; `mass`
/// is an optional positive diagonal. Returns all eigenpairs, ascending.
std::vector<EigenPair> dense_eigenpairs(std::span<const double> a, std::size_t n,
                                        std::span<const double> mass = {});

/// Residual ||A x - lambda B x|| / ||x||_B computed by direct multiplication.
double residual_norm(const SparseSymmetric& a, double lambda, std::span<const double> x);

/// Least-squares line through (log eps, log err).
RateFit fit_rate(std::span<const std::pair<double, double>> points);

/// Trapezoid weights for `n` equally spaced nodes with spacing `step`.
std::vector<double> trapezoid_weights(std::size_t n, double step);

/// Empirical order from three values at parameters h, h/r, h/r^2.
/// Returns nullopt when the differences do not shrink geometrically.
std::optional<double> empirical_order(double coarse, double mid, double fine, double ratio);

/// Richardson limit given values at h and h/ratio and the error order.
double richardson(double coarse, double fine, double ratio, double order);

}  // namespace thintube::numerics

#include "thintube/numerics.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#ifdef THINTUBE_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace thintube::numerics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Fix the sign so the largest-magnitude component is positive.
void canonical_sign(std::vector<double>& v) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[imax]) * (1.0 + 1e-12)) imax = i;
  if (!v.empty() && v[imax] < 0.0)
    for (double& x : v) x = -x;
}

// Solves (T - shift) x = b in place by Gaussian elimination with partial
// pivoting. Zero pivots are replaced by `tiny`, which is what inverse
// iteration needs near an exact eigenvalue.
void solve_shifted(const TridiagonalMatrix& t, double shift, double tiny, std::vector<double>& b) {
  const std::size_t n = t.size();
  if (n == 1) {
    double d = t.diag[0] - shift;
    if (std::abs(d) < tiny) d = tiny;
    b[0] /= d;
    return;
  }
  std::vector<double> d(n), du(t.offdiag), dl(t.offdiag), du2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = t.diag[i] - shift;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (std::abs(d[i]) < tiny) d[i] = d[i] < 0 ? -tiny : tiny;
      const double fact = dl[i] / d[i];
      d[i + 1] -= fact * du[i];
      b[i + 1] -= fact * b[i];
      du2[i] = 0.0;
    } else {
      const double fact = d[i] / dl[i];
      d[i] = dl[i];
      const double temp = d[i + 1];
      d[i + 1] = du[i] - fact * temp;
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -fact * du2[i];
      }
      du[i] = temp;
      const double tb = b[i];
      b[i] = b[i + 1];
      b[i + 1] = tb - fact * b[i + 1];
    }
  }
  if (std::abs(d[n - 1]) < tiny) d[n - 1] = tiny;
  b[n - 1] /= d[n - 1];
  b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
  for (std::size_t k = n - 2; k-- > 0;) b[k] = (b[k] - du[k] * b[k + 1] - du2[k] * b[k + 2]) / d[k];
}

double tridiag_norm(const TridiagonalMatrix& t) {
  double norm = 0.0;
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    double row = std::abs(t.diag[i]);
    if (i > 0) row += std::abs(t.offdiag[i - 1]);
    if (i + 1 < n) row += std::abs(t.offdiag[i]);
    norm = std::max(norm, row);
  }
  return norm;
}

double pivot_floor(const TridiagonalMatrix& t) {
  double emax = 1.0;
  for (double e : t.offdiag) emax = std::max(emax, e * e);
  return std::numeric_limits<double>::min() * emax / kEps;
}

std::size_t sturm_count_impl(const TridiagonalMatrix& t, double x, double pivmin) {
  std::size_t count = 0;
  double q = t.diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < t.size(); ++i) {
    q = t.diag[i] - x - t.offdiag[i - 1] * t.offdiag[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0) ++count;
  }
  return count;
}

}  // namespace

// ---------------------------------------------------------------------------
// TridiagonalMatrix

void TridiagonalMatrix::validate() const {
  if (diag.empty()) throw std::invalid_argument("tridiagonal matrix is empty");
  if (offdiag.size() + 1 != diag.size())
    throw std::invalid_argument("tridiagonal matrix: offdiag length must be n-1");
  for (double v : diag)
    if (!std::isfinite(v)) throw std::invalid_argument("tridiagonal matrix: non-finite diagonal");
  for (double v : offdiag)
    if (!std::isfinite(v)) throw std::invalid_argument("tridiagonal matrix: non-finite offdiagonal");
}

std::vector<double> TridiagonalMatrix::multiply(std::span<const double> x) const {
  const std::size_t n = size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += offdiag[i - 1] * x[i - 1];
    if (i + 1 < n) s += offdiag[i] * x[i + 1];
    y[i] = s;
  }
  return y;
}

std::size_t sturm_count(const TridiagonalMatrix& t, double x) {
  t.validate();
  return sturm_count_impl(t, x, pivot_floor(t));
}

std::vector<EigenPair> tridiag_smallest(const TridiagonalMatrix& t, std::size_t count, double tol) {
  t.validate();
  const std::size_t n = t.size();
  if (count == 0 || count > n) throw std::invalid_argument("tridiag_smallest: count must be in [1, n]");
  if (!(tol > 0)) throw std::invalid_argument("tridiag_smallest: tolerance must be positive");

  const double pivmin = pivot_floor(t);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.offdiag[i - 1]);
    if (i + 1 < n) r += std::abs(t.offdiag[i]);
    lo = std::min(lo, t.diag[i] - r);
    hi = std::max(hi, t.diag[i] + r);
  }
  const double tnorm = std::max(tridiag_norm(t), pivmin);
  lo -= 2.0 * kEps * tnorm + pivmin;
  hi += 2.0 * kEps * tnorm + pivmin;

  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    // Smallest x with count(x) > k.
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (b - a <= 2.0 * kEps * std::max(std::abs(a), std::abs(b)) + pivmin) break;
      if (mid <= a || mid >= b) break;
      if (sturm_count_impl(t, mid, pivmin) > k)
        b = mid;
      else
        a = mid;
    }
    values[k] = 0.5 * (a + b);
    lo = a;  // eigenvalues are nondecreasing in k
  }

  std::vector<EigenPair> out(count);
  const double cluster_gap = 1e-3 * tnorm;
  const double tiny = std::max(kEps * tnorm, pivmin);
  std::size_t cluster_start = 0;
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0 && values[k] - values[k - 1] > cluster_gap) cluster_start = k;
    std::mt19937_64 rng(0x5eed + k);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = dist(rng);

    // Separate coincident shifts so each member of a cluster gets its own solve.
    const double shift = values[k] + static_cast<double>(k - cluster_start) * 10.0 * kEps * tnorm;
    double res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 50; ++it) {
      solve_shifted(t, shift, tiny, x);
      for (std::size_t p = cluster_start; p < k; ++p) {
        const double proj = dot(out[p].vector, x);
        for (std::size_t i = 0; i < n; ++i) x[i] -= proj * out[p].vector[i];
      }
      const double nrm = norm2(x);
      if (!(nrm > 0) || !std::isfinite(nrm)) {
        for (std::size_t i = 0; i < n; ++i) x[i] = dist(rng);
        continue;
      }
      for (double& v : x) v /= nrm;
      const auto tx = t.multiply(x);
      double r2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) r2 += (tx[i] - values[k] * x[i]) * (tx[i] - values[k] * x[i]);
      res = std::sqrt(r2);
      if (it >= 1 && res <= tol) break;
    }
    if (!(res <= tol))
      throw ConvergenceError("tridiag_smallest: inverse iteration did not reach tolerance", res);
    canonical_sign(x);
    out[k] = EigenPair{values[k], std::move(x), res};
  }
  return out;
}

// ---------------------------------------------------------------------------
// SparseSymmetric

void SparseSymmetric::add(std::size_t row, std::size_t col, double value) {
  if (row >= n_ || col >= n_) throw std::out_of_range("SparseSymmetric::add: index out of range");
  if (row > col) std::swap(row, col);
  entries_.push_back({row, col, value});
  compressed_ = false;
}

void SparseSymmetric::compress() {
  if (compressed_) return;
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Entry> merged;
  merged.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  entries_ = std::move(merged);
  compressed_ = true;
}

void SparseSymmetric::set_mass(std::vector<double> mass_diag) {
  if (mass_diag.size() != n_) throw std::invalid_argument("mass diagonal has wrong length");
  for (double m : mass_diag)
    if (!(m > 0) || !std::isfinite(m))
      throw std::invalid_argument("mass diagonal entries must be positive and finite");
  mass_ = std::move(mass_diag);
}

std::vector<double> SparseSymmetric::multiply(std::span<const double> x) const {
  std::vector<double> y(n_, 0.0);
  for (const auto& e : entries_) {
    y[e.row] += e.value * x[e.col];
    if (e.row != e.col) y[e.col] += e.value * x[e.row];
  }
  return y;
}

std::vector<double> SparseSymmetric::apply_mass(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  if (mass_)
    for (std::size_t i = 0; i < n_; ++i) y[i] *= (*mass_)[i];
  return y;
}

double SparseSymmetric::norm_inf() const {
  std::vector<double> row(n_, 0.0);
  for (const auto& e : entries_) {
    row[e.row] += std::abs(e.value);
    if (e.row != e.col) row[e.col] += std::abs(e.value);
  }
  return row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
}

std::vector<double> SparseSymmetric::to_dense() const {
  std::vector<double> d(n_ * n_, 0.0);
  for (const auto& e : entries_) {
    d[e.row * n_ + e.col] += e.value;
    if (e.row != e.col) d[e.col * n_ + e.row] += e.value;
  }
  return d;
}

double residual_norm(const SparseSymmetric& a, double lambda, std::span<const double> x) {
  const auto ax = a.multiply(x);
  const auto bx = a.apply_mass(x);
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (ax[i] - lambda * bx[i]) * (ax[i] - lambda * bx[i]);
  const double xb = std::sqrt(dot(x, bx));
  return std::sqrt(r2) / xb;
}

// ---------------------------------------------------------------------------
// Dense fallback

std::vector<EigenPair> dense_eigenpairs(std::span<const double> a, std::size_t n,
                                        std::span<const double> mass) {
  if (a.size() != n * n) throw std::invalid_argument("dense_eigenpairs: matrix size mismatch");
  if (!mass.empty() && mass.size() != n) throw std::invalid_argument("dense_eigenpairs: mass size mismatch");
  std::vector<double> scale(n, 1.0);
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (!(mass[i] > 0)) throw std::invalid_argument("dense_eigenpairs: mass entries must be positive");
    scale[i] = 1.0 / std::sqrt(mass[i]);
  }
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]) * scale[i] * scale[j];
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double total = 0.0;
  for (double x : c) total += x * x;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += c[p * n + q] * c[p * n + q];
    if (off <= 1e-32 * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = c[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = c[p * n + p], aqq = c[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double tt = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(tt * tt + 1.0), sn = tt * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = c[k * n + p], akq = c[k * n + q];
          c[k * n + p] = cs * akp - sn * akq;
          c[k * n + q] = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = c[p * n + k], aqk = c[q * n + k];
          c[p * n + k] = cs * apk - sn * aqk;
          c[q * n + k] = sn * apk + cs * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = cs * vkp - sn * vkq;
          v[k * n + q] = sn * vkp + cs * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return c[i * n + i] < c[j * n + j]; });
  std::vector<EigenPair> out;
  out.reserve(n);
  for (std::size_t idx : order) {
    EigenPair ep;
    ep.value = c[idx * n + idx];
    ep.vector.resize(n);
    for (std::size_t k = 0; k < n; ++k) ep.vector[k] = v[k * n + idx] * scale[k];
    canonical_sign(ep.vector);
    // Residual against the original pair (A, B).
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * ep.vector[j];
      const double bx = (mass.empty() ? 1.0 : mass[i]) * ep.vector[i];
      r2 += (s - ep.value * bx) * (s - ep.value * bx);
    }
    ep.residual = std::sqrt(r2);
    out.push_back(std::move(ep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sparse path: block Lanczos on the shift-inverted operator

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, std::ptrdiff_t>;

#ifdef THINTUBE_HAVE_CHOLMOD
// Supernodal factorization goes through the system BLAS. Some BLAS kernel
// selections return wrong pivots, so probe once on a known SPD matrix and
// fall back to the simplicial mode when the probe fails.
bool supernodal_usable() {
  static const bool ok = [] {
    constexpr std::ptrdiff_t side = 40, n = side * side;
    std::vector<Eigen::Triplet<double, std::ptrdiff_t>> trip;
    for (std::ptrdiff_t i = 0; i < side; ++i)
      for (std::ptrdiff_t j = 0; j < side; ++j) {
        const std::ptrdiff_t k = i * side + j;
        trip.emplace_back(k, k, 4.0);
        if (i + 1 < side) trip.emplace_back(k, k + side, -1.0);
        if (j + 1 < side) trip.emplace_back(k, k + 1, -1.0);
      }
    SpMat m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    Eigen::CholmodDecomposition<SpMat, Eigen::Upper> f;
    f.cholmod().print = 0;
    f.setMode(Eigen::CholmodSupernodalLLt);
    f.compute(m);
    if (f.info() != Eigen::Success) return false;
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
    const Eigen::VectorXd x = f.solve(b);
    const SpMat full = m.selfadjointView<Eigen::Upper>();
    return (full * x - b).norm() <= 1e-10 * b.norm();
  }();
  return ok;
}
#endif

// Cholesky factor of a shifted operator; factor() reports positive definiteness.
class Solver {
 public:
#ifdef THINTUBE_HAVE_CHOLMOD
  Solver() {
    impl_.cholmod().print = 0;
    impl_.setMode(supernodal_usable() ? Eigen::CholmodSupernodalLLt : Eigen::CholmodSimplicialLLt);
  }
#endif
  bool factor(const SpMat& k) {
    impl_.compute(k);
#ifdef THINTUBE_HAVE_CHOLMOD
    return impl_.info() == Eigen::Success;
#else
    return impl_.info() == Eigen::Success && impl_.vectorD().minCoeff() > 0.0;
#endif
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return impl_.solve(b); }

 private:
#ifdef THINTUBE_HAVE_CHOLMOD
  Eigen::CholmodDecomposition<SpMat, Eigen::Upper> impl_;
#else
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper, Eigen::AMDOrdering<std::ptrdiff_t>> impl_;
#endif
};

// Upper triangle of S (A - sigma B) S with S = B^{-1/2}.
SpMat scaled_shifted(const SparseSymmetric& a, const Eigen::VectorXd& scale, double sigma) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  std::vector<Eigen::Triplet<double, std::ptrdiff_t>> trip;
  trip.reserve(a.entries().size() + a.size());
  for (const auto& e : a.entries())
    trip.emplace_back(static_cast<std::ptrdiff_t>(e.row), static_cast<std::ptrdiff_t>(e.col),
                      e.value * scale[e.row] * scale[e.col]);
  for (std::ptrdiff_t i = 0; i < n; ++i) trip.emplace_back(i, i, -sigma);
  SpMat m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

double gershgorin_lower(const SparseSymmetric& a, const Eigen::VectorXd& scale) {
  std::vector<double> diag(a.size(), 0.0), off(a.size(), 0.0);
  for (const auto& e : a.entries()) {
    const double v = e.value * scale[e.row] * scale[e.col];
    if (e.row == e.col) {
      diag[e.row] += v;
    } else {
      off[e.row] += std::abs(v);
      off[e.col] += std::abs(v);
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) lo = std::min(lo, diag[i] - off[i]);
  return lo;
}

// Orthonormalize the columns of w against `basis` (first `used` columns) and
// among themselves. Returns R such that w_in ~ basis*coef + Q*R; columns that
// vanish are replaced by fresh random directions with zero R rows.
Eigen::MatrixXd orthonormalize_block(const Eigen::MatrixXd& basis, Eigen::Index used, Eigen::MatrixXd& w,
                                     Eigen::MatrixXd* coef, std::mt19937_64& rng, double scale_ref) {
  std::normal_distribution<double> dist;
  const Eigen::Index bs = w.cols();
  if (used > 0) {
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::MatrixXd c = basis.leftCols(used).transpose() * w;
      w.noalias() -= basis.leftCols(used) * c;
      if (coef) *coef += c;
    }
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(bs, bs);
  for (Eigen::Index k = 0; k < bs; ++k) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index p = 0; p < k; ++p) {
        const double proj = w.col(p).dot(w.col(k));
        w.col(k) -= proj * w.col(p);
        r(p, k) += proj;
      }
    }
    double nrm = w.col(k).norm();
    if (nrm <= 1e-13 * scale_ref) {
      // Exhausted direction: continue the Krylov space with a random vector.
      r(k, k) = 0.0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, k) = dist(rng);
      for (int pass = 0; pass < 2; ++pass) {
        if (used > 0) w.col(k) -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w.col(k));
        for (Eigen::Index p = 0; p < k; ++p) w.col(k) -= w.col(p).dot(w.col(k)) * w.col(p);
      }
      nrm = w.col(k).norm();
      w.col(k) /= nrm;
    } else {
      r(k, k) = nrm;
      w.col(k) /= nrm;
    }
  }
  return r;
}

}  // namespace

std::vector<EigenPair> sparse_smallest(const SparseSymmetric& a_in, std::size_t count, double tol,
                                       std::size_t iter_cap) {
  SparseSymmetric a = a_in;
  a.compress();
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("sparse_smallest: empty matrix");
  if (count == 0 || count > n) throw std::invalid_argument("sparse_smallest: count must be in [1, n]");
  if (!(tol > 0)) throw std::invalid_argument("sparse_smallest: tolerance must be positive");
  if (iter_cap == 0)
    iter_cap = static_cast<std::size_t>(std::ceil(50.0 * static_cast<double>(count) * std::sqrt(static_cast<double>(n))));

  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(N);
  if (a.mass())
    for (Eigen::Index i = 0; i < N; ++i) scale[i] = 1.0 / std::sqrt((*a.mass())[static_cast<std::size_t>(i)]);

  double sigma = 0.0;
  Solver solver;
  {
    SpMat k = scaled_shifted(a, scale, sigma);
    const bool pd = solver.factor(k);
    if (!pd) {
      const double lo = gershgorin_lower(a, scale);
      sigma = lo - 1e-3 * (1.0 + std::abs(lo));
      k = scaled_shifted(a, scale, sigma);
      if (!solver.factor(k))
        throw ConvergenceError("sparse_smallest: factorization of the shifted operator broke down",
                               std::numeric_limits<double>::infinity());
    }
  }

  const Eigen::Index bs = std::min<Eigen::Index>(N, std::max<Eigen::Index>(static_cast<Eigen::Index>(count), 2));
  Eigen::Index m_max;
  if (n <= 400)
    m_max = N;
  else
    m_max = std::min<Eigen::Index>(N, std::max<Eigen::Index>(6 * bs, static_cast<Eigen::Index>(3 * count + 60)));
  m_max = std::max<Eigen::Index>(m_max, std::min<Eigen::Index>(N, bs));

  std::mt19937_64 rng(0x1a2c05);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd start(N, bs);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < bs; ++j) start(i, j) = dist(rng);

  const auto residuals_for = [&](const Eigen::MatrixXd& y, std::vector<EigenPair>& pairs) {
    double worst = 0.0;
    pairs.clear();
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      EigenPair ep;
      ep.vector.resize(n);
      for (Eigen::Index i = 0; i < N; ++i) ep.vector[static_cast<std::size_t>(i)] = scale[i] * y(i, c);
      const auto ax = a.multiply(ep.vector);
      const auto bx = a.apply_mass(ep.vector);
      const double xbx = dot(ep.vector, bx);
      ep.value = dot(ep.vector, ax) / xbx;
      const double xn = std::sqrt(xbx);
      for (double& v : ep.vector) v /= xn;
      double r2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = (ax[i] - ep.value * bx[i]) / xn;
        r2 += r * r;
      }
      ep.residual = std::sqrt(r2);
      worst = std::max(worst, ep.residual);
      pairs.push_back(std::move(ep));
    }
    return worst;
  };

  std::size_t applications = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<EigenPair> pairs;
  while (true) {
    Eigen::MatrixXd basis(N, m_max);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m_max + bs, m_max);
    Eigen::MatrixXd w = start;
    orthonormalize_block(basis, 0, w, nullptr, rng, 1.0);
    basis.leftCols(bs) = w;
    Eigen::Index cols = bs;
    Eigen::Index processed = 0;
    double op_scale = 1.0;
    Eigen::MatrixXd ritz;

    while (processed < cols) {
      const Eigen::Index bb = std::min<Eigen::Index>(bs, cols - processed);
      Eigen::MatrixXd ow(N, bb);
      for (Eigen::Index c = 0; c < bb; ++c) ow.col(c) = solver.solve(basis.col(processed + c));
      applications += static_cast<std::size_t>(bb);
      op_scale = std::max(op_scale, ow.norm());
      Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(cols, bb);
      Eigen::MatrixXd r = orthonormalize_block(basis, cols, ow, &coef, rng, op_scale);
      h.block(0, processed, cols, bb) = coef;
      processed += bb;
      const Eigen::Index room = std::min<Eigen::Index>(bb, m_max - cols);
      if (room > 0) {
        basis.middleCols(cols, room) = ow.leftCols(room);
        h.block(cols, processed - bb, room, bb) = r.topRows(room);
        cols += room;
      }

      const bool full = processed == cols;
      if (processed < static_cast<Eigen::Index>(count) || (!full && processed < 2 * bs)) continue;
      Eigen::MatrixXd hq = h.topLeftCorner(processed, processed);
      hq = 0.5 * (hq + hq.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hq);
      // Largest theta of (C - sigma)^{-1} <-> smallest eigenvalues of C.
      Eigen::MatrixXd s(processed, static_cast<Eigen::Index>(count));
      for (std::size_t c = 0; c < count; ++c) s.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(processed - 1 - static_cast<Eigen::Index>(c));
      ritz = basis.leftCols(processed) * s;
      const double worst = residuals_for(ritz, pairs);
      best = std::min(best, worst);
      if (worst <= tol) {
        std::sort(pairs.begin(), pairs.end(), [](const EigenPair& x, const EigenPair& y) { return x.value < y.value; });
        for (auto& p : pairs) canonical_sign(p.vector);
        return pairs;
      }
      if (applications >= iter_cap)
        throw ConvergenceError("sparse_smallest: iteration cap reached without meeting tolerance", best);
      if (full) break;
    }
    // Thick-ish restart from the current Ritz block plus random fill.
    start = Eigen::MatrixXd(N, bs);
    for (Eigen::Index c = 0; c < bs; ++c) {
      if (c < ritz.cols())
        start.col(c) = ritz.col(c);
      else
        for (Eigen::Index i = 0; i < N; ++i) start(i, c) = dist(rng);
    }
    if (applications >= iter_cap)
      throw ConvergenceError("sparse_smallest: iteration cap reached without meeting tolerance", best);
  }
}

// ---------------------------------------------------------------------------
// Rates and extrapolation

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 0)) throw std::invalid_argument("fit_rate: epsilon must be positive");
    if (!(points[i].second > 0)) throw std::invalid_argument("fit_rate: errors must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (points[i].first == points[j].first) throw std::invalid_argument("fit_rate: epsilon values must be distinct");
  }
  const double m = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& [e, r] : points) {
    sx += std::log(e);
    sy += std::log(r);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [e, r] : points) {
    const double dx = std::log(e) - mx, dy = std::log(r) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [e, r] : points) {
    const double d = std::log(r) - (fit.intercept + fit.slope * std::log(e));
    ss_res += d * d;
  }
  fit.r_squared = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

std::vector<double> trapezoid_weights(std::size_t n, double step) {
  std::vector<double> w(n, step);
  if (n >= 2) {
    w.front() = 0.5 * step;
    w.back() = 0.5 * step;
  }
  return w;
}

std::optional<double> empirical_order(double coarse, double mid, double fine, double ratio) {
  const double d1 = coarse - mid, d2 = mid - fine;
  if (!(ratio > 1.0) || d2 == 0.0 || d1 * d2 <= 0.0) return std::nullopt;
  const double q = d1 / d2;
  if (!(q > 1.0)) return std::nullopt;
  return std::log(q) / std::log(ratio);
}

double richardson(double coarse, double fine, double ratio, double order) {
  return fine + (fine - coarse) / (std::pow(ratio, order) - 1.0);
}

}  // namespace thintube::numerics

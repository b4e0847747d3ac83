#pragma once

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thintube {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// J is singular or orientation-reversing (beta <= 0) at the requested point.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scalar function of arc length with a derivative. Catalog entries carry an
/// analytic derivative; everything else falls back to a central difference
/// with step 1e-6 * max(1, |s|).
class ScalarFunction {
 public:
  using Fn = std::function<double(double)>;

  ScalarFunction() : ScalarFunction(0.0) {}
  ScalarFunction(Fn value, std::optional<Fn> derivative, std::string description);
  explicit ScalarFunction(double constant);

  /// Catalog form `name{p0,p1,...}` (parabola_cap, rational_cap, gauss_bump,
  /// const, poly) or an expression in `s`.
  static ScalarFunction parse(const std::string& spec);
  static ScalarFunction from_expression(const std::string& text);

  static ScalarFunction parabola_cap(double m);  // M - s^2
  static ScalarFunction rational_cap(double m);  // M - s^2/(1+s^2)
  static ScalarFunction gauss_bump(double k0);   // k0 exp(-s^2)
  static ScalarFunction constant(double v);
  static ScalarFunction poly(std::vector<double> coefficients);  // c0 + c1 s + ...

  double operator()(double s) const { return value_(s); }
  double derivative(double s) const;
  bool has_analytic_derivative() const { return derivative_.has_value(); }
  /// True when the function is the catalog constant 0.
  bool is_identically_zero() const { return zero_; }
  const std::string& description() const { return description_; }

 private:
  Fn value_;
  std::optional<Fn> derivative_;
  std::string description_;
  bool zero_ = false;
};

/// I = [-a, b] or the whole line.
struct Interval {
  double a = 1.0;
  double b = 1.0;
  bool unbounded = false;

  static Interval bounded(double a, double b);
  static Interval real_line() { return Interval{0.0, 0.0, true}; }
  double left() const { return unbounded ? -std::numeric_limits<double>::infinity() : -a; }
  double right() const { return unbounded ? std::numeric_limits<double>::infinity() : b; }
};

/// Tube data: curvature k, torsion tau, cross-section rotation alpha and
/// deformation profile h over I. The operators only ever see these scalars.
struct TubeGeometry {
  Interval interval;
  ScalarFunction curvature;
  ScalarFunction torsion;
  ScalarFunction rotation;
  ScalarFunction profile;

  double max_profile() const { return profile(0.0); }  // M
  double twist(double s) const { return torsion(s) + rotation.derivative(s); }  // tau + alpha'
  double log_slope(double s) const { return profile.derivative(s) / profile(s); }  // h'/h
  /// Sampling nodes on I (or on [-window, window] when I is the real line).
  std::vector<double> sample_grid(std::size_t samples, double window = 50.0) const;
};

struct ValidationClause {
  std::string name;
  bool passed = true;
  std::string detail;
};

/// A sampled check cannot prove the hypotheses on h, only falsify them:
/// `consistent` means no clause failed on the grid.
struct ValidationReport {
  bool consistent = true;
  double max_value = 0.0;          // M = h(0)
  double quadratic_coefficient = 0.0;
  double sup_log_slope = 0.0;      // sup |h'/h| on the grid
  std::optional<double> limsup;    // N, unbounded I only
  std::vector<ValidationClause> clauses;
  /// Name of the first failing clause, empty if consistent.
  std::string failing_clause() const;
};

struct ValidationOptions {
  std::size_t samples = 4096;
  double window = 50.0;            // sampling half-width for unbounded I
  double quadratic_tolerance = 0.05;
};

ValidationReport validate_deformation(const ScalarFunction& h, const Interval& interval,
                                      const ValidationOptions& options = {});

/// z_alpha = (cos alpha, -sin alpha)
Vec2 z_alpha(double alpha);
/// z_alpha^perp = (sin alpha, cos alpha)
Vec2 z_alpha_perp(double alpha);

/// beta_eps(s, y) = 1 - eps h(s) k(s) <z_alpha(s), y>
double beta(const TubeGeometry& g, double s, const Vec2& y, double eps);

/// Largest eps with beta_eps > delta on I x S: (1 - delta) / (||k h||_inf rho_S).
/// Returns +infinity for a straight tube.
double epsilon_max(const TubeGeometry& g, double delta, double rho_s, std::size_t samples = 4096);

/// Rows e1 = d f/ds, e2 = d f/dy1, e3 = d f/dy2 in the Frenet frame.
Mat3 jacobian(const TubeGeometry& g, double s, const Vec2& y, double eps);
Mat3 jacobian_inverse(const TubeGeometry& g, double s, const Vec2& y, double eps);
double determinant(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);

struct FrameSample {
  double s = 0.0;
  Vec3 tangent{}, normal{}, binormal{};
  double curvature = 0.0;
  double torsion = 0.0;
  /// False where the curvature is below 1e-10: normal, binormal and torsion
  /// are then undefined and left at zero.
  bool frame_defined = false;
};

/// Finite-difference Frenet frame of a curve sampled on a uniform arc-length
/// grid. The two samples at each end are dropped (five-point stencils).
std::vector<FrameSample> frenet_from_curve(std::span<const std::pair<double, Vec3>> samples);

}  // namespace thintube

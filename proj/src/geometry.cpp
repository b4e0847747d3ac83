#include "thintube/geometry.hpp"

#include "thintube/expression.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

namespace thintube {

// ---------------------------------------------------------------------------
// ScalarFunction

ScalarFunction::ScalarFunction(Fn value, std::optional<Fn> derivative, std::string description)
    : value_(std::move(value)), derivative_(std::move(derivative)), description_(std::move(description)) {}

ScalarFunction::ScalarFunction(double constant) : ScalarFunction(ScalarFunction::constant(constant)) {}

double ScalarFunction::derivative(double s) const {
  if (derivative_) return (*derivative_)(s);
  const double step = 1e-6 * std::max(1.0, std::abs(s));
  return (value_(s + step) - value_(s - step)) / (2.0 * step);
}

ScalarFunction ScalarFunction::parabola_cap(double m) {
  std::ostringstream d;
  d << "parabola_cap{" << m << "}";
  return ScalarFunction([m](double s) { return m - s * s; }, Fn([](double s) { return -2.0 * s; }), d.str());
}

ScalarFunction ScalarFunction::rational_cap(double m) {
  std::ostringstream d;
  d << "rational_cap{" << m << "}";
  return ScalarFunction([m](double s) { return m - s * s / (1.0 + s * s); },
                        Fn([](double s) {
                          const double q = 1.0 + s * s;
                          return -2.0 * s / (q * q);
                        }),
                        d.str());
}

ScalarFunction ScalarFunction::gauss_bump(double k0) {
  std::ostringstream d;
  d << "gauss_bump{" << k0 << "}";
  return ScalarFunction([k0](double s) { return k0 * std::exp(-s * s); },
                        Fn([k0](double s) { return -2.0 * s * k0 * std::exp(-s * s); }), d.str());
}

ScalarFunction ScalarFunction::constant(double v) {
  std::ostringstream d;
  d << "const{" << v << "}";
  ScalarFunction f([v](double) { return v; }, Fn([](double) { return 0.0; }), d.str());
  f.zero_ = v == 0.0;
  return f;
}

ScalarFunction ScalarFunction::poly(std::vector<double> c) {
  if (c.empty()) c.push_back(0.0);
  std::ostringstream d;
  d << "poly{";
  for (std::size_t i = 0; i < c.size(); ++i) d << (i ? "," : "") << c[i];
  d << "}";
  const bool zero = std::all_of(c.begin(), c.end(), [](double x) { return x == 0.0; });
  ScalarFunction f(
      [c](double s) {
        double acc = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
        return acc;
      },
      Fn([c](double s) {
        double acc = 0.0;
        for (std::size_t i = c.size(); i-- > 1;) acc = acc * s + static_cast<double>(i) * c[i];
        return acc;
      }),
      d.str());
  f.zero_ = zero;
  return f;
}

ScalarFunction ScalarFunction::from_expression(const std::string& text) {
  auto expr = Expression::parse(text);
  return ScalarFunction([expr](double s) { return expr(s); }, std::nullopt, text);
}

ScalarFunction ScalarFunction::parse(const std::string& spec) {
  static const std::regex catalog(R"(^\s*([a-z_]+)\s*\{([^}]*)\}\s*$)");
  std::smatch m;
  if (std::regex_match(spec, m, catalog)) {
    const std::string name = m[1];
    std::vector<double> params;
    std::stringstream ss(m[2].str());
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("catalog function '" + name + "': bad parameter '" + item + "'");
      }
      if (item.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument("catalog function '" + name + "': bad parameter '" + item + "'");
      params.push_back(v);
    }
    const auto need = [&](std::size_t n) {
      if (params.size() != n)
        throw std::invalid_argument("catalog function '" + name + "' takes " + std::to_string(n) + " parameter(s)");
    };
    if (name == "parabola_cap") { need(1); return parabola_cap(params[0]); }
    if (name == "rational_cap") { need(1); return rational_cap(params[0]); }
    if (name == "gauss_bump") { need(1); return gauss_bump(params[0]); }
    if (name == "const") { need(1); return constant(params[0]); }
    if (name == "poly") {
      if (params.empty()) throw std::invalid_argument("catalog function 'poly' needs coefficients");
      return poly(params);
    }
    throw std::invalid_argument("unknown catalog function '" + name + "'");
  }
  return from_expression(spec);
}

// ---------------------------------------------------------------------------
// Interval / TubeGeometry

Interval Interval::bounded(double a, double b) {
  if (!(a > 0) || !(b > 0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("interval [-a, b] needs 0 < a, b < inf");
  return Interval{a, b, false};
}

std::vector<double> TubeGeometry::sample_grid(std::size_t samples, double window) const {
  const double lo = interval.unbounded ? -window : -interval.a;
  const double hi = interval.unbounded ? window : interval.b;
  samples = std::max<std::size_t>(samples, 2);
  std::vector<double> grid;
  grid.reserve(samples + 100);
  for (std::size_t i = 0; i < samples; ++i)
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1));
  // Geometric refinement toward s = 0 on both sides.
  for (int k = 1; k <= 40; ++k) {
    const double f = std::ldexp(1.0, -k);
    grid.push_back(lo * f);
    grid.push_back(hi * f);
  }
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// ---------------------------------------------------------------------------
// validate_deformation

std::string ValidationReport::failing_clause() const {
  for (const auto& c : clauses)
    if (!c.passed) return c.name;
  return {};
}

ValidationReport validate_deformation(const ScalarFunction& h, const Interval& interval,
                                      const ValidationOptions& options) {
  TubeGeometry g;
  g.interval = interval;
  g.profile = h;
  const auto grid = g.sample_grid(options.samples, options.window);

  ValidationReport report;
  const double m = h(0.0);
  report.max_value = m;

  {
    ValidationClause c{"positivity", true, ""};
    for (double s : grid) {
      if (!(h(s) > 0.0)) {
        c.passed = false;
        std::ostringstream d;
        d << "h(" << s << ") = " << h(s) << " is not positive";
        c.detail = d.str();
        break;
      }
    }
    report.clauses.push_back(c);
  }
  {
    ValidationClause c{"single_maximum", true, ""};
    // Near 0, M - h(s) ~ s^2 underflows against M; only require h <= M there.
    for (double s : grid) {
      const bool strict = std::abs(s) > 1e-3;
      if (s != 0.0 && (strict ? !(h(s) < m) : !(h(s) <= m))) {
        c.passed = false;
        std::ostringstream d;
        d << "h(" << s << ") = " << h(s) << " is not below h(0) = " << m;
        c.detail = d.str();
        break;
      }
    }
    report.clauses.push_back(c);
  }
  {
    ValidationClause c{"log_slope_bounded", true, ""};
    double sup = 0.0;
    for (double s : grid) {
      const double v = std::abs(h.derivative(s) / h(s));
      if (!std::isfinite(v)) {
        sup = v;
        break;
      }
      sup = std::max(sup, v);
    }
    report.sup_log_slope = sup;
    if (!std::isfinite(sup) || sup > 1e12) {
      c.passed = false;
      c.detail = "|h'/h| is unbounded on the sampling grid";
    }
    report.clauses.push_back(c);
  }
  {
    // Fit (M - h(s)) / s^2 = a0 + a1 s + a2 s^2 on s in [-0.1, 0.1] \ {0}.
    ValidationClause c{"quadratic_contact", true, ""};
    double ata[3][3] = {}, atb[3] = {};
    std::size_t used = 0;
    for (int k = 0; k <= 12; ++k) {
      for (double sign : {-1.0, 1.0}) {
        const double s = sign * 0.1 * std::ldexp(1.0, -k);
        if (s < interval.left() || s > interval.right()) continue;
        const double q = (m - h(s)) / (s * s);
        const double basis[3] = {1.0, s, s * s};
        for (int i = 0; i < 3; ++i) {
          atb[i] += basis[i] * q;
          for (int j = 0; j < 3; ++j) ata[i][j] += basis[i] * basis[j];
        }
        ++used;
      }
    }
    // 3x3 Gaussian elimination.
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
      std::swap(ata[col], ata[piv]);
      std::swap(atb[col], atb[piv]);
      for (int r = col + 1; r < 3; ++r) {
        const double f = ata[r][col] / ata[col][col];
        for (int j = col; j < 3; ++j) ata[r][j] -= f * ata[col][j];
        atb[r] -= f * atb[col];
      }
    }
    double coef[3];
    for (int i = 2; i >= 0; --i) {
      double acc = atb[i];
      for (int j = i + 1; j < 3; ++j) acc -= ata[i][j] * coef[j];
      coef[i] = acc / ata[i][i];
    }
    report.quadratic_coefficient = used >= 3 ? coef[0] : std::nan("");
    if (!(std::abs(report.quadratic_coefficient - 1.0) <= options.quadratic_tolerance)) {
      c.passed = false;
      std::ostringstream d;
      d << "(M - h(s))/s^2 tends to " << report.quadratic_coefficient << ", expected 1";
      c.detail = d.str();
    }
    report.clauses.push_back(c);
  }
  if (interval.unbounded) {
    ValidationClause c{"limsup_below_max", true, ""};
    double n = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 6; ++k) {
      const double s = options.window * std::ldexp(1.0, k);
      n = std::max({n, h(s), h(-s)});
    }
    report.limsup = n;
    // An approach to M within sampling resolution counts as reaching it.
    if (!(n < m - 1e-6 * std::abs(m))) {
      c.passed = false;
      std::ostringstream d;
      d << "limsup h = " << n << " is not below M = " << m;
      c.detail = d.str();
    }
    report.clauses.push_back(c);
  }

  report.consistent = std::all_of(report.clauses.begin(), report.clauses.end(),
                                  [](const ValidationClause& c) { return c.passed; });
  return report;
}

// ---------------------------------------------------------------------------
// beta, Jacobian

Vec2 z_alpha(double alpha) { return {std::cos(alpha), -std::sin(alpha)}; }
Vec2 z_alpha_perp(double alpha) { return {std::sin(alpha), std::cos(alpha)}; }

namespace {
double dot2(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
}  // namespace

double beta(const TubeGeometry& g, double s, const Vec2& y, double eps) {
  return 1.0 - eps * g.profile(s) * g.curvature(s) * dot2(z_alpha(g.rotation(s)), y);
}

double epsilon_max(const TubeGeometry& g, double delta, double rho_s, std::size_t samples) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("epsilon_max: delta must lie in (0, 1)");
  if (!(rho_s > 0.0)) throw std::invalid_argument("epsilon_max: rho_S must be positive");
  if (g.curvature.is_identically_zero()) return std::numeric_limits<double>::infinity();
  double kh = 0.0;
  for (double s : g.sample_grid(samples)) kh = std::max(kh, std::abs(g.curvature(s) * g.profile(s)));
  if (kh == 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - delta) / (kh * rho_s);
}

Mat3 jacobian(const TubeGeometry& g, double s, const Vec2& y, double eps) {
  const double b = beta(g, s, y, eps);
  if (!(b > 0.0)) throw SingularityError("jacobian: beta_eps <= 0 at s = " + std::to_string(s));
  const double alpha = g.rotation(s), h = g.profile(s), dh = g.profile.derivative(s), tw = g.twist(s);
  const double zy = dot2(z_alpha(alpha), y), zpy = dot2(z_alpha_perp(alpha), y);
  const double c = std::cos(alpha), sn = std::sin(alpha), eh = eps * h;
  return Mat3{{{b, -eh * tw * zpy + eps * dh * zy, eh * tw * zy + eps * dh * zpy},
               {0.0, eh * c, eh * sn},
               {0.0, -eh * sn, eh * c}}};
}

Mat3 jacobian_inverse(const TubeGeometry& g, double s, const Vec2& y, double eps) {
  const double b = beta(g, s, y, eps);
  if (!(b > 0.0)) throw SingularityError("jacobian_inverse: beta_eps <= 0 at s = " + std::to_string(s));
  const double alpha = g.rotation(s), h = g.profile(s), ls = g.log_slope(s), tw = g.twist(s);
  const double c = std::cos(alpha), sn = std::sin(alpha), eh = eps * h;
  return Mat3{{{1.0 / b, (tw * y[1] - ls * y[0]) / b, (-tw * y[0] - ls * y[1]) / b},
               {0.0, c / eh, -sn / eh},
               {0.0, sn / eh, c / eh}}};
}

double determinant(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// ---------------------------------------------------------------------------
// Frenet frame

namespace {
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }
}  // namespace

std::vector<FrameSample> frenet_from_curve(std::span<const std::pair<double, Vec3>> samples) {
  if (samples.size() < 5) throw std::invalid_argument("frenet_from_curve: need at least 5 samples");
  const double step = samples[1].first - samples[0].first;
  if (!(step > 0)) throw std::invalid_argument("frenet_from_curve: arc length must increase");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (std::abs(samples[i].first - samples[i - 1].first - step) > 1e-9 * std::max(1.0, std::abs(samples[i].first)))
      throw std::invalid_argument("frenet_from_curve: samples must be on a uniform grid");

  std::vector<FrameSample> out;
  out.reserve(samples.size() - 4);
  for (std::size_t i = 2; i + 2 < samples.size(); ++i) {
    const auto& m2 = samples[i - 2].second;
    const auto& m1 = samples[i - 1].second;
    const auto& c0 = samples[i].second;
    const auto& p1 = samples[i + 1].second;
    const auto& p2 = samples[i + 2].second;
    Vec3 d1{}, d2{}, d3{};
    for (int k = 0; k < 3; ++k) {
      d1[k] = (-p2[k] + 8.0 * p1[k] - 8.0 * m1[k] + m2[k]) / (12.0 * step);
      d2[k] = (-p2[k] + 16.0 * p1[k] - 30.0 * c0[k] + 16.0 * m1[k] - m2[k]) / (12.0 * step * step);
      d3[k] = (p2[k] - 2.0 * p1[k] + 2.0 * m1[k] - m2[k]) / (2.0 * step * step * step);
    }
    FrameSample f;
    f.s = samples[i].first;
    const double speed = norm3(d1);
    for (int k = 0; k < 3; ++k) f.tangent[k] = d1[k] / speed;
    const Vec3 b = cross(d1, d2);
    const double bn = norm3(b);
    f.curvature = bn / (speed * speed * speed);
    if (f.curvature >= 1e-10) {
      f.frame_defined = true;
      for (int k = 0; k < 3; ++k) f.binormal[k] = b[k] / bn;
      f.normal = cross(f.binormal, f.tangent);
      f.torsion = dot3(b, d3) / (bn * bn);
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace thintube

#include "thintube/effective1d.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace thintube {

const char* to_string(BoundaryCondition bc) { return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "neumann"; }

double theta(const TubeGeometry& g, const SectionConstants& c, double s) {
  const double tw = g.twist(s), ls = g.log_slope(s);
  return c.c1 * tw * tw + (c.c2 - 1.0) * ls * ls - 2.0 * c.c3 * tw * ls;
}

double zeta(const TubeGeometry& g, const SectionConstants& c, double s, double eps) {
  const auto z = z_alpha(g.rotation(s));
  return 1.0 - eps * g.curvature(s) * g.profile(s) * (z[0] * c.f[0] + z[1] * c.f[1]);
}

double c_constant(const TubeGeometry& g, const SectionConstants& c, std::span<const double> nodes) {
  const double m = g.max_profile();
  double th = 0.0, k2 = 0.0;
  for (double s : nodes) {
    th = std::max(th, std::abs(theta(g, c, s)));
    const double k = g.curvature(s);
    k2 = std::max(k2, k * k / 4.0);
  }
  return th + k2 / (m * m) + 1.0;
}

namespace {

// lambda0 (1/h^2 - 1/M^2) / eps^2
double well(const TubeGeometry& g, double lambda0, double s, double eps) {
  const double h = g.profile(s), m = g.max_profile();
  return lambda0 * (1.0 / (h * h) - 1.0 / (m * m)) / (eps * eps);
}

}  // namespace

double potential_W(const TubeGeometry& g, const SectionData& section, double s, double eps, double c) {
  return theta(g, section.constants, s) + c + zeta(g, section.constants, s, eps) * well(g, section.lambda0, s, eps);
}

Window bounded_window(const Interval& interval) {
  if (interval.unbounded) throw std::invalid_argument("bounded_window: interval is the whole line");
  return Window{-interval.a, interval.b};
}

std::size_t default_nodes(const Window& window, double eps) {
  const double target = std::sqrt(eps) / 20.0;
  const auto intervals = static_cast<std::size_t>(std::ceil(window.length() / target));
  return std::max<std::size_t>(64, intervals > 0 ? intervals - 1 : 0);
}

namespace {

Operator1D assemble_impl(const TubeGeometry& g, const SectionData& section, double eps, const Window& window,
                         const AssembleOptions& options, bool scaled) {
  if (!(eps > 0)) throw std::invalid_argument("assemble_T: eps must be positive");
  if (!(window.length() > 0)) throw std::invalid_argument("assemble_T: empty window");
  const std::size_t n = options.n ? options.n : default_nodes(window, eps);
  if (n < 64) throw std::invalid_argument("assemble_T: need at least 64 interior nodes");

  Operator1D op;
  op.bc = options.bc;
  op.window = window;
  op.dilated = scaled;
  const double step = window.length() / static_cast<double>(n + 1);
  const bool neumann = options.bc == BoundaryCondition::Neumann;
  const std::size_t first = neumann ? 0 : 1, last = neumann ? n + 1 : n;

  auto& p = op.potential;
  p.eps = eps;
  p.step = step;
  for (std::size_t i = first; i <= last; ++i) p.s.push_back(window.left + static_cast<double>(i) * step);
  p.c = options.c ? *options.c : c_constant(g, section.constants, p.s);

  for (double s : p.s) {
    const double z = zeta(g, section.constants, s, eps);
    if (!(z > options.delta)) {
      std::ostringstream msg;
      msg << "zeta_eps(" << s << ") = " << z << " is not above the guard " << options.delta << " at eps = " << eps;
      throw AdmissibilityError(msg.str());
    }
    const double th = theta(g, section.constants, s);
    p.theta.push_back(th);
    p.zeta.push_back(z);
    p.w.push_back(th + p.c + z * well(g, section.lambda0, s, eps));
  }
  if (step > std::sqrt(eps) / 10.0) {
    std::ostringstream msg;
    msg << "grid step " << step << " exceeds sqrt(eps)/10 = " << std::sqrt(eps) / 10.0 << "; the well is under-resolved";
    op.warnings.push_back(msg.str());
  }

  // In dilated coordinates the step is step / sqrt(eps) and the potential eps W.
  const double scale = scaled ? eps : 1.0;
  const double d = scaled ? step / std::sqrt(eps) : step;
  const double inv = 1.0 / (d * d);
  const std::size_t dim = p.s.size();
  auto& t = op.matrix;
  t.diag.resize(dim);
  t.offdiag.assign(dim - 1, -inv);
  for (std::size_t i = 0; i < dim; ++i) t.diag[i] = 2.0 * inv + scale * p.w[i];
  if (neumann) {
    t.offdiag.front() = -std::sqrt(2.0) * inv;
    t.offdiag.back() = -std::sqrt(2.0) * inv;
  }
  return op;
}

}  // namespace

Operator1D assemble_T(const TubeGeometry& g, const SectionData& section, double eps, const Window& window,
                      const AssembleOptions& options) {
  return assemble_impl(g, section, eps, window, options, false);
}

Operator1D assemble_scaled(const TubeGeometry& g, const SectionData& section, double eps, const Window& window,
                           const AssembleOptions& options) {
  return assemble_impl(g, section, eps, window, options, true);
}

std::vector<double> spectrum(const Operator1D& op, std::size_t count) {
  if (count == 0 || count > op.matrix.size())
    throw std::invalid_argument("spectrum: requested " + std::to_string(count) + " eigenvalues of a " +
                                std::to_string(op.matrix.size()) + "-dimensional operator");
  double norm = 0.0;
  for (std::size_t i = 0; i < op.matrix.size(); ++i) norm = std::max(norm, std::abs(op.matrix.diag[i]));
  const double tol = std::max(numerics::kDefaultTolerance, 1e-12 * norm);
  const auto pairs = numerics::tridiag_smallest(op.matrix, count, tol);
  std::vector<double> out;
  out.reserve(count);
  for (const auto& e : pairs) out.push_back(e.value);
  return out;
}

std::vector<double> scaled_spectrum(const Operator1D& op, std::size_t j_max) {
  if (j_max >= op.matrix.size())
    throw std::invalid_argument("scaled_spectrum: j_max = " + std::to_string(j_max) +
                                " is not below the dimension " + std::to_string(op.matrix.size()));
  auto values = spectrum(op, j_max + 1);
  const double eps = op.potential.eps;
  for (double& v : values) v = op.dilated ? v - eps * op.potential.c : eps * (v - op.potential.c);
  return values;
}

std::vector<double> weo_spectrum_exact(const WEOSpec& spec, std::size_t j_max) {
  if (!(spec.kappa() > 0)) throw std::invalid_argument("WEO spring constant must be positive");
  const double root = std::sqrt(spec.kappa());
  std::vector<double> out;
  for (std::size_t j = 0; j <= j_max; ++j) out.push_back((2.0 * static_cast<double>(j) + 1.0) * root);
  return out;
}

NumericSpectrum weo_spectrum_numeric(double kappa, double half_width, std::size_t n, std::size_t j_max) {
  if (!(kappa > 0)) throw std::invalid_argument("weo_spectrum_numeric: kappa must be positive");
  const double top = (2.0 * static_cast<double>(j_max) + 1.0) * std::sqrt(kappa);
  if (!(kappa * half_width * half_width > 10.0 * top))
    throw std::invalid_argument("weo_spectrum_numeric: window too small for the requested eigenvalues");
  if (j_max >= n) throw std::invalid_argument("weo_spectrum_numeric: j_max must be below n");
  const double step = 2.0 * half_width / static_cast<double>(n + 1);
  numerics::TridiagonalMatrix t;
  t.diag.resize(n);
  t.offdiag.assign(n - 1, -1.0 / (step * step));
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -half_width + static_cast<double>(i + 1) * step;
    t.diag[i] = 2.0 / (step * step) + kappa * s * s;
  }
  const double norm = 4.0 / (step * step) + kappa * half_width * half_width;
  const auto pairs = numerics::tridiag_smallest(t, j_max + 1, std::max(numerics::kDefaultTolerance, 1e-12 * norm));
  NumericSpectrum out;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& v = pairs[j].vector;
    double peak = 0.0;
    for (double x : v) peak = std::max(peak, std::abs(x));
    const double tail = std::max(std::abs(v.front()), std::abs(v.back()));
    if (tail > 1e-8 * peak) {
      std::ostringstream msg;
      msg << "eigenfunction " << j << " reaches " << tail / peak << " of its peak at the window edge";
      out.warnings.push_back(msg.str());
    }
    out.values.push_back(pairs[j].value);
  }
  return out;
}

NumericSpectrum weo_spectrum_numeric(const WEOSpec& spec, double half_width, std::size_t n, std::size_t j_max) {
  return weo_spectrum_numeric(spec.kappa(), half_width, n, j_max);
}

Window auto_window(const TubeGeometry& g, const SectionData& section, double eps, std::size_t target_j,
                   const AutoWindowOptions& options) {
  if (!g.interval.unbounded) return bounded_window(g.interval);
  const double mu = weo_spectrum_exact({section.lambda0, g.max_profile()}, target_j).back();
  const auto confined = [&](double s) {
    return eps * (theta(g, section.constants, s) +
                  zeta(g, section.constants, s, eps) * well(g, section.lambda0, s, eps)) >=
           10.0 * mu;
  };
  for (double l = options.start; l <= options.cap; l *= options.growth)
    if (confined(l) && confined(-l)) return Window{-l, l};
  std::ostringstream msg;
  msg << "no window up to L = " << options.cap << " reaches eps (W - c) >= 10 mu_" << target_j << " = " << 10.0 * mu
      << " at eps = " << eps << "; raise the cap or lower eps";
  throw WindowError(msg.str());
}

std::string potential_csv(const EffectivePotential& p) {
  std::ostringstream out;
  out << "s,theta,zeta,W\n";
  char buf[128];
  for (std::size_t i = 0; i < p.s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", p.s[i], p.theta[i], p.zeta[i], p.w[i]);
    out << buf;
  }
  return out.str();
}

std::string potential_json(const EffectivePotential& p, std::span<const double> spectrum) {
  nlohmann::json j;
  j["eps"] = p.eps;
  j["c"] = p.c;
  j["step"] = p.step;
  j["s"] = p.s;
  j["theta"] = p.theta;
  j["zeta"] = p.zeta;
  j["W"] = p.w;
  if (!spectrum.empty()) j["spectrum"] = std::vector<double>(spectrum.begin(), spectrum.end());
  return j.dump(2);
}

}  // namespace thintube

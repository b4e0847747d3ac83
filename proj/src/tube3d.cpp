#include "thintube/tube3d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace thintube {

Grid3D make_grid3d(const Window& window, std::size_t n_s, const SectionGrid& section, BoundaryCondition bc) {
  if (n_s < 2) throw std::invalid_argument("make_grid3d: need at least two interior planes");
  if (!(window.length() > 0)) throw std::invalid_argument("make_grid3d: empty window");
  if (section.size() == 0) throw std::invalid_argument("make_grid3d: empty section grid");
  Grid3D grid;
  grid.window = window;
  grid.bc = bc;
  grid.ds = window.length() / static_cast<double>(n_s + 1);
  grid.section = section;
  const bool neumann = bc == BoundaryCondition::Neumann;
  const std::size_t first = neumann ? 0 : 1, last = neumann ? n_s + 1 : n_s;
  for (std::size_t i = first; i <= last; ++i) {
    grid.s.push_back(window.left + static_cast<double>(i) * grid.ds);
    grid.s_weight.push_back((neumann && (i == first || i == last)) ? 0.5 * grid.ds : grid.ds);
  }
  return grid;
}

namespace {

// beta_eps(s, .) with the s-dependent factors evaluated once.
struct BetaSlice {
  double a = 0.0;  // eps h k
  Vec2 z{1.0, 0.0};
  double operator()(const Vec2& y) const { return 1.0 - a * (z[0] * y[0] + z[1] * y[1]); }
};

BetaSlice beta_slice(const TubeGeometry& g, double s, double eps) {
  return {eps * g.profile(s) * g.curvature(s), z_alpha(g.rotation(s))};
}

void require_positive(double b, double s, const Vec2& y) {
  if (!(b > 0)) {
    std::ostringstream msg;
    msg << "beta_eps(" << s << ", (" << y[0] << ", " << y[1] << ")) = " << b << " is not positive";
    throw SingularityError(msg.str());
  }
}

// Coefficients of v at each section node in y.grad v (gy) and Ry.grad v (gr).
struct NodeStencils {
  std::vector<std::vector<StencilTerm>> d1, d2;
};

NodeStencils node_stencils(const SectionGrid& grid) {
  NodeStencils st;
  st.d1.resize(grid.size());
  st.d2.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    st.d1[i] = gradient_stencil(grid, static_cast<int>(i), 0);
    st.d2[i] = gradient_stencil(grid, static_cast<int>(i), 1);
  }
  return st;
}

// Terms of (K u)_i with K u = -ls (u + y.grad u) + tw Ry.grad u, Ry = (-y2, y1).
void k_row(const SectionGrid& grid, const NodeStencils& st, std::size_t i, double ls, double tw,
           std::map<int, double>& out) {
  out.clear();
  const auto& y = grid.points[i];
  out[static_cast<int>(i)] += -ls;
  const double a1 = -ls * y[0] - tw * y[1];
  const double a2 = -ls * y[1] + tw * y[0];
  for (const auto& t : st.d1[i]) out[t.index] += a1 * t.coef;
  for (const auto& t : st.d2[i]) out[t.index] += a2 * t.coef;
}

AssembledForm assemble(const TubeGeometry& g, const SectionModes& modes, const Grid3D& grid, double eps, double c,
                       bool weighted) {
  if (!(eps > 0)) throw std::invalid_argument("assemble: eps must be positive");
  const auto& sec = grid.section;
  if (sec.size() != modes.grid.size())
    throw std::invalid_argument("assemble: grid section does not match the section modes");
  const std::size_t ns = sec.size();
  const std::size_t planes = grid.planes();
  const double lambda0 = modes.lambda0;
  const double m = g.max_profile();
  const double cell = sec.cell_area();

  AssembledForm form;
  form.eps = eps;
  form.c = c;
  form.weighted = weighted;
  form.stiffness = numerics::SparseSymmetric(grid.size());
  form.mass_diag.resize(grid.size());
  auto& a = form.stiffness;

  // Transverse and zeroth-order terms, plane by plane.
  for (std::size_t p = 0; p < planes; ++p) {
    const double s = grid.s[p];
    const BetaSlice b = beta_slice(g, s, eps);
    const double h = g.profile(s);
    const auto weight = [&](const Vec2& y) {
      const double v = b(y);
      require_positive(v, s, y);
      return v;
    };
    const auto transverse = section_stiffness(sec, weight);
    const double factor = grid.s_weight[p] * cell / (eps * eps * h * h);
    for (const auto& e : transverse.entries()) a.add(grid.index(p, e.row), grid.index(p, e.col), factor * e.value);
    const double w = grid.cell_weight(p);
    for (std::size_t i = 0; i < ns; ++i) {
      const double bi = b(sec.points[i]);
      require_positive(bi, s, sec.points[i]);
      const double mass = weighted ? bi : 1.0;
      a.add(grid.index(p, i), grid.index(p, i), w * (c * mass - lambda0 * bi / (eps * eps * m * m)));
      form.mass_diag[grid.index(p, i)] = w * mass;
    }
  }

  // Longitudinal D^T Q D over the s-edges. Edge e joins planes e-1 and e
  // (Dirichlet; missing planes carry v = 0) or e and e+1 (Neumann).
  const auto st = node_stencils(sec);
  const bool neumann = grid.bc == BoundaryCondition::Neumann;
  const std::size_t edges = neumann ? planes - 1 : planes + 1;
  std::map<int, double> kr;
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t e = 0; e < edges; ++e) {
    const long lo = neumann ? static_cast<long>(e) : static_cast<long>(e) - 1;
    const long hi = lo + 1;
    const double s_lo = neumann ? grid.s[e] : grid.window.left + static_cast<double>(e) * grid.ds;
    const double sm = s_lo + 0.5 * grid.ds;
    const double ls = g.log_slope(sm), tw = g.twist(sm);
    const BetaSlice b = beta_slice(g, sm, eps);
    for (std::size_t i = 0; i < ns; ++i) {
      double q = grid.ds * cell;
      if (weighted) {
        const double bi = b(sec.points[i]);
        require_positive(bi, sm, sec.points[i]);
        q /= bi;
      }
      k_row(sec, st, i, ls, tw, kr);
      row.clear();
      for (long plane : {lo, hi}) {
        if (plane < 0 || plane >= static_cast<long>(planes)) continue;
        const auto pl = static_cast<std::size_t>(plane);
        const double sign = plane == lo ? -1.0 : 1.0;
        bool self = false;
        for (const auto& [node, coef] : kr) {
          double v = 0.5 * coef;
          if (node == static_cast<int>(i)) {
            v += sign / grid.ds;
            self = true;
          }
          row.emplace_back(grid.index(pl, static_cast<std::size_t>(node)), v);
        }
        if (!self) row.emplace_back(grid.index(pl, i), sign / grid.ds);
      }
      for (std::size_t x = 0; x < row.size(); ++x)
        for (std::size_t y = x; y < row.size(); ++y) a.add(row[x].first, row[y].first, q * row[x].second * row[y].second);
    }
  }
  a.compress();
  return form;
}

}  // namespace

AssembledForm assemble_g(const TubeGeometry& g, const SectionModes& modes, const Grid3D& grid, double eps,
                         double c) {
  return assemble(g, modes, grid, eps, c, false);
}

AssembledForm assemble_ghat(const TubeGeometry& g, const SectionModes& modes, const Grid3D& grid, double eps,
                            double c) {
  return assemble(g, modes, grid, eps, c, true);
}

std::vector<numerics::EigenPair> spectrum3d(const AssembledForm& form, std::size_t count, double tol) {
  numerics::SparseSymmetric a = form.stiffness;
  a.set_mass(form.mass_diag);
  if (!(tol > 0)) {
    const double min_mass = *std::min_element(form.mass_diag.begin(), form.mass_diag.end());
    tol = std::max(numerics::kDefaultTolerance, 1e-12 * a.norm_inf() / std::sqrt(min_mass));
  }
  if (a.size() <= 300) {
    auto all = numerics::dense_eigenpairs(a.to_dense(), a.size(), *a.mass());
    all.resize(std::min(count, all.size()));
    return all;
  }
  return numerics::sparse_smallest(a, count, tol);
}

std::vector<double> product_field(const Grid3D& grid, std::span<const double> w, std::span<const double> u0) {
  if (w.size() != grid.planes() || u0.size() != grid.section.size())
    throw std::invalid_argument("product_field: sizes do not match the grid");
  std::vector<double> v(grid.size());
  for (std::size_t p = 0; p < w.size(); ++p)
    for (std::size_t i = 0; i < u0.size(); ++i) v[grid.index(p, i)] = w[p] * u0[i];
  return v;
}

double form_value(const AssembledForm& form, std::span<const double> x) {
  const auto ax = form.stiffness.multiply(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * ax[i];
  return acc;
}

SectionData reduction_section_data(const SectionModes& modes) {
  const auto& grid = modes.grid;
  const auto& u = modes.u0;
  const auto grad = section_gradient(grid, u);
  const double cell = grid.cell_area();
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  Vec2 f{0.0, 0.0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& y = grid.points[i];
    const double radial = u[i] + y[0] * grad[i][0] + y[1] * grad[i][1];
    const double rot = -y[1] * grad[i][0] + y[0] * grad[i][1];
    c1 += cell * rot * rot;
    c2 += cell * radial * radial;
    c3 += cell * radial * rot;
    f[0] += cell * y[0] * u[i] * u[i];
    f[1] += cell * y[1] * u[i] * u[i];
  }
  SectionData data;
  data.lambda0 = modes.lambda0;
  data.constants.c1 = c1;
  data.constants.c2 = 1.0 + c2;
  data.constants.c3 = c3;
  data.constants.f = f;
  data.constants.rho_s = modes.domain.rho();
  return data;
}

void export_matrix(const numerics::SparseSymmetric& a_in, const std::string& path) {
  numerics::SparseSymmetric a = a_in;
  a.compress();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_matrix: cannot open " + path);
  out << a.size() << ' ' << a.entries().size() << '\n';
  char buf[96];
  for (const auto& e : a.entries()) {
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", e.row, e.col, e.value);
    out << buf;
  }
  if (!out) throw std::runtime_error("export_matrix: write failed for " + path);
}

namespace {

struct Resolution {
  SectionModes modes;
  SectionData data;
  Grid3D grid;
};

Resolution make_resolution(const TubeGeometry& g, const CrossSectionDomain& domain, std::size_t n_s, int section_n) {
  auto modes = solve_modes(domain, section_n);
  auto data = reduction_section_data(modes);
  auto grid = make_grid3d(bounded_window(g.interval), n_s, modes.grid);
  return {std::move(modes), std::move(data), std::move(grid)};
}

double coercivity_d(const TubeGeometry& g, const SectionData& data, std::span<const double> nodes, double c) {
  const double m = g.max_profile();
  double th = 0.0, k2 = 0.0;
  for (double s : nodes) {
    th = std::max(th, std::abs(theta(g, data.constants, s)));
    k2 = std::max(k2, g.curvature(s) * g.curvature(s) / 4.0);
  }
  return c - th - k2 / (m * m);
}

struct EpsResult {
  std::vector<double> hat, other;
  double d = 0.0;
};

EpsResult solve_pair(const TubeGeometry& g, const Resolution& r, double eps, std::size_t j_max, bool reduction) {
  EpsResult out;
  const double c = c_constant(g, r.data.constants, r.grid.s);
  out.d = coercivity_d(g, r.data, r.grid.s, c);
  const auto hat = spectrum3d(assemble_ghat(g, r.modes, r.grid, eps, c), j_max + 1);
  for (const auto& e : hat) out.hat.push_back(e.value);
  if (reduction) {
    AssembleOptions opt;
    opt.n = r.grid.planes();
    opt.c = c;
    const auto op = assemble_T(g, r.data, eps, r.grid.window, opt);
    out.other = spectrum(op, j_max + 1);
  } else {
    const auto plain = spectrum3d(assemble_g(g, r.modes, r.grid, eps, c), j_max + 1);
    for (const auto& e : plain) out.other.push_back(e.value);
  }
  return out;
}

Tube3DReport run_check(const TubeGeometry& g, const CrossSectionDomain& domain, std::span<const double> eps_list,
                       std::size_t j_max, const Tube3DOptions& options, bool reduction) {
  if (g.interval.unbounded) throw std::invalid_argument("3D checks need a bounded interval");
  if (eps_list.size() < 4) throw std::invalid_argument("3D checks need at least four eps values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw std::invalid_argument("eps list must be strictly decreasing");

  Tube3DReport report;
  report.kind = reduction ? "reduction" : "form_comparison";
  const auto fine = make_resolution(g, domain, options.n_s, options.section_n);
  const auto coarse = make_resolution(g, domain, options.coarse_n_s, options.coarse_section_n);
  report.all_zero = true;
  for (double eps : eps_list) {
    const auto f = solve_pair(g, fine, eps, j_max, reduction);
    const auto cr = solve_pair(g, coarse, eps, j_max, reduction);
    for (std::size_t j = 0; j <= j_max; ++j) {
      Tube3DRow row;
      row.eps = eps;
      row.j = j;
      row.l_hat = f.hat[j];
      row.l_other = f.other[j];
      row.difference = std::abs(1.0 / f.hat[j] - 1.0 / f.other[j]);
      row.coarse_difference = std::abs(1.0 / cr.hat[j] - 1.0 / cr.other[j]);
      row.spread = row.difference > 0 ? std::abs(row.difference - row.coarse_difference) / row.difference : 0.0;
      row.d = f.d;
      if (row.difference != 0.0) report.all_zero = false;
      if (row.spread > options.spread_limit) report.grid_limited = true;
      report.rows.push_back(row);
    }
  }
  for (std::size_t j = 0; j <= j_max; ++j) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : report.rows)
      if (r.j == j && r.difference > 0) pts.emplace_back(r.eps, r.difference);
    if (pts.size() == eps_list.size())
      report.fits.emplace_back(numerics::fit_rate(pts));
    else
      report.fits.emplace_back(std::nullopt);
  }
  if (report.grid_limited)
    report.notes.push_back("grid-limited: discretization spread exceeds " + std::to_string(options.spread_limit) +
                           " of a measured difference; rate not asserted");
  report.notes.push_back(
      "differences of inverse eigenvalues witness, and do not prove, the operator-norm resolvent bound");
  return report;
}

}  // namespace

Tube3DReport form_comparison_check(const TubeGeometry& g, const CrossSectionDomain& domain,
                                   std::span<const double> eps_list, std::size_t j_max,
                                   const Tube3DOptions& options) {
  return run_check(g, domain, eps_list, j_max, options, false);
}

Tube3DReport reduction_check(const TubeGeometry& g, const CrossSectionDomain& domain,
                             std::span<const double> eps_list, std::size_t j_max, const Tube3DOptions& options) {
  return run_check(g, domain, eps_list, j_max, options, true);
}

}  // namespace thintube

#include "thintube/cross_section.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace thintube {

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

double cross2(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const Vec2 r{p2[0] - p1[0], p2[1] - p1[1]};
  const Vec2 s{q2[0] - q1[0], q2[1] - q1[1]};
  const double d1 = cross2(r, {q1[0] - p1[0], q1[1] - p1[1]});
  const double d2 = cross2(r, {q2[0] - p1[0], q2[1] - p1[1]});
  const double d3 = cross2(s, {p1[0] - q1[0], p1[1] - q1[1]});
  const double d4 = cross2(s, {p2[0] - q1[0], p2[1] - q1[1]});
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab{b[0] - a[0], b[1] - a[1]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1];
  double t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1]);
}

}  // namespace

CrossSectionDomain CrossSectionDomain::disk(double radius, Vec2 center) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("disk radius must be positive");
  return CrossSectionDomain(Disk{radius, center});
}

CrossSectionDomain CrossSectionDomain::rectangle(Vec2 x_range, Vec2 y_range) {
  if (!(x_range[1] > x_range[0]) || !(y_range[1] > y_range[0]))
    throw std::invalid_argument("rectangle ranges must be increasing");
  return CrossSectionDomain(Rectangle{x_range, y_range});
}

CrossSectionDomain CrossSectionDomain::polygon(std::vector<Vec2> v) {
  const std::size_t n = v.size();
  if (n < 3) throw std::invalid_argument("polygon needs at least three vertices");
  double area = 0.0;
  for (std::size_t i = 0; i < n; ++i) area += cross2(v[i], v[(i + 1) % n]);
  if (std::abs(area) < 1e-14) throw std::invalid_argument("polygon has zero area");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the wrap
      if (segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
        throw std::invalid_argument("polygon edges " + std::to_string(i) + " and " + std::to_string(j) + " cross");
    }
  }
  return CrossSectionDomain(Polygon{std::move(v)});
}

bool CrossSectionDomain::contains(const Vec2& y) const {
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    const double dx = y[0] - d->center[0], dy = y[1] - d->center[1];
    return dx * dx + dy * dy < d->radius * d->radius;
  }
  if (const auto* r = std::get_if<Rectangle>(&shape_))
    return y[0] > r->x_range[0] && y[0] < r->x_range[1] && y[1] > r->y_range[0] && y[1] < r->y_range[1];
  const auto& v = std::get<Polygon>(shape_).vertices;
  const auto box = bounding_box();
  const double scale = std::max(box[1] - box[0], box[3] - box[2]);
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (segment_distance(y, v[j], v[i]) <= 1e-12 * scale) return false;
    if ((v[i][1] > y[1]) != (v[j][1] > y[1])) {
      const double x = v[j][0] + (y[1] - v[j][1]) * (v[i][0] - v[j][0]) / (v[i][1] - v[j][1]);
      if (y[0] < x) inside = !inside;
    }
  }
  return inside;
}

double CrossSectionDomain::boundary_distance(const Vec2& p, int dir) const {
  const double ux = kDx[dir], uy = kDy[dir];
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    // |p - c + t u|^2 = r^2, positive root.
    const double px = p[0] - d->center[0], py = p[1] - d->center[1];
    const double b = px * ux + py * uy;
    const double c = px * px + py * py - d->radius * d->radius;
    return -b + std::sqrt(std::max(0.0, b * b - c));
  }
  if (const auto* r = std::get_if<Rectangle>(&shape_)) {
    switch (dir) {
      case 0: return r->x_range[1] - p[0];
      case 1: return p[0] - r->x_range[0];
      case 2: return r->y_range[1] - p[1];
      default: return p[1] - r->y_range[0];
    }
  }
  const auto& v = std::get<Polygon>(shape_).vertices;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    // p + t u = a + w (b - a), t > 0, w in [0, 1]
    const Vec2 e{v[i][0] - v[j][0], v[i][1] - v[j][1]};
    const double den = cross2({ux, uy}, e);
    if (den == 0.0) continue;
    const Vec2 ap{v[j][0] - p[0], v[j][1] - p[1]};
    const double t = cross2(ap, e) / den;
    const double w = cross2(ap, {ux, uy}) / den;
    if (t > 0.0 && w >= 0.0 && w <= 1.0) best = std::min(best, t);
  }
  return best;
}

std::array<double, 4> CrossSectionDomain::bounding_box() const {
  if (const auto* d = std::get_if<Disk>(&shape_))
    return {d->center[0] - d->radius, d->center[0] + d->radius, d->center[1] - d->radius, d->center[1] + d->radius};
  if (const auto* r = std::get_if<Rectangle>(&shape_)) return {r->x_range[0], r->x_range[1], r->y_range[0], r->y_range[1]};
  const auto& v = std::get<Polygon>(shape_).vertices;
  std::array<double, 4> box{v[0][0], v[0][0], v[0][1], v[0][1]};
  for (const auto& p : v) {
    box[0] = std::min(box[0], p[0]);
    box[1] = std::max(box[1], p[0]);
    box[2] = std::min(box[2], p[1]);
    box[3] = std::max(box[3], p[1]);
  }
  return box;
}

double CrossSectionDomain::rho() const {
  if (const auto* d = std::get_if<Disk>(&shape_)) return std::hypot(d->center[0], d->center[1]) + d->radius;
  std::vector<Vec2> corners;
  if (const auto* r = std::get_if<Rectangle>(&shape_)) {
    for (double x : r->x_range)
      for (double y : r->y_range) corners.push_back({x, y});
  } else {
    corners = std::get<Polygon>(shape_).vertices;
  }
  double best = 0.0;
  for (const auto& c : corners) best = std::max(best, std::hypot(c[0], c[1]));
  return best;
}

std::string CrossSectionDomain::describe() const {
  std::ostringstream out;
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    out << "disk(r=" << d->radius << ", c=(" << d->center[0] << "," << d->center[1] << "))";
  } else if (const auto* r = std::get_if<Rectangle>(&shape_)) {
    out << "rectangle((" << r->x_range[0] << "," << r->x_range[1] << ")x(" << r->y_range[0] << "," << r->y_range[1]
        << "))";
  } else {
    out << "polygon(" << std::get<Polygon>(shape_).vertices.size() << " vertices)";
  }
  return out.str();
}

SectionGrid build_section_grid(const CrossSectionDomain& domain, int n) {
  if (n < 2) throw std::invalid_argument("section grid needs n >= 2");
  const auto box = domain.bounding_box();
  SectionGrid g;
  g.x0 = box[0];
  g.y0 = box[2];
  g.step = std::max(box[1] - box[0], box[3] - box[2]) / n;
  g.nx = static_cast<int>(std::ceil((box[1] - box[0]) / g.step - 1e-9)) + 1;
  g.ny = static_cast<int>(std::ceil((box[3] - box[2]) / g.step - 1e-9)) + 1;
  g.index.assign(static_cast<std::size_t>(g.nx) * g.ny, -1);

  // Nodes closer to the boundary than this are treated as boundary points.
  const double min_gap = 1e-6 * g.step;
  std::vector<std::array<double, 4>> gaps;
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) {
      const Vec2 p{g.x0 + i * g.step, g.y0 + j * g.step};
      if (!domain.contains(p)) continue;
      std::array<double, 4> gap{};
      bool keep = true;
      for (int d = 0; d < 4; ++d) {
        gap[d] = std::min(g.step, domain.boundary_distance(p, d));
        if (gap[d] < min_gap) keep = false;
      }
      if (!keep) continue;
      g.index[static_cast<std::size_t>(i) * g.ny + j] = static_cast<int>(g.points.size());
      g.points.push_back(p);
      gaps.push_back(gap);
    }
  }
  if (g.points.empty()) throw DomainError("no grid node lies inside " + domain.describe() + " at n = " + std::to_string(n));

  g.neighbor.resize(g.points.size());
  g.gap.resize(g.points.size());
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) {
      const int u = g.index[static_cast<std::size_t>(i) * g.ny + j];
      if (u < 0) continue;
      for (int d = 0; d < 4; ++d) {
        const int ii = i + kDx[d], jj = j + kDy[d];
        int v = -1;
        if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny) v = g.index[static_cast<std::size_t>(ii) * g.ny + jj];
        // A neighbour across the boundary (non-convex S) is not coupled.
        if (v >= 0 && gaps[u][d] < g.step) v = -1;
        g.neighbor[u][d] = v;
        g.gap[u][d] = v >= 0 ? g.step : gaps[u][d];
      }
    }
  }
  return g;
}

std::vector<StencilTerm> gradient_stencil(const SectionGrid& grid, int unknown, int axis) {
  const int plus = 2 * axis, minus = 2 * axis + 1;
  const double a = grid.gap[unknown][minus], b = grid.gap[unknown][plus];
  std::vector<StencilTerm> out;
  out.reserve(3);
  if (const int m = grid.neighbor[unknown][minus]; m >= 0) out.push_back({m, -b / (a * (a + b))});
  out.push_back({unknown, (b - a) / (a * b)});
  if (const int p = grid.neighbor[unknown][plus]; p >= 0) out.push_back({p, a / (b * (a + b))});
  return out;
}

numerics::SparseSymmetric section_stiffness(const SectionGrid& grid,
                                            const std::function<double(const Vec2&)>& weight) {
  const double h = grid.step;
  numerics::SparseSymmetric a(grid.size());
  for (std::size_t u = 0; u < grid.size(); ++u) {
    const auto& p = grid.points[u];
    double diag = 0.0;
    for (int d = 0; d < 4; ++d) {
      const int v = grid.neighbor[u][d];
      const double len = grid.gap[u][d];
      const Vec2 mid{p[0] + 0.5 * len * kDx[d], p[1] + 0.5 * len * kDy[d]};
      const double w = weight ? weight(mid) : 1.0;
      if (v >= 0) {
        diag += w / (h * h);
        if (static_cast<std::size_t>(v) > u) a.add(u, v, -w / (h * h));
      } else {
        diag += w / (h * len);
      }
    }
    a.add(u, u, diag);
  }
  a.compress();
  return a;
}

namespace {

std::vector<numerics::EigenPair> lowest_pairs(const numerics::SparseSymmetric& a, std::size_t count) {
  const std::size_t n = a.size();
  if (n <= 2 * count + 2) {
    auto all = numerics::dense_eigenpairs(a.to_dense(), n, a.mass() ? std::span<const double>(*a.mass())
                                                                     : std::span<const double>());
    all.resize(std::min(count, all.size()));
    return all;
  }
  const double tol = std::max(numerics::kDefaultTolerance, kSectionRelativeTolerance * a.norm_inf());
  return numerics::sparse_smallest(a, count, tol);
}

}  // namespace

SectionModes solve_modes(const CrossSectionDomain& domain, int n) {
  if (n < 16) throw std::invalid_argument("solve_modes: resolution must be at least 16");
  SectionModes modes{domain, n, build_section_grid(domain, n), 0.0, 0.0, {}};
  const auto a = section_stiffness(modes.grid);
  const auto pairs = lowest_pairs(a, 2);
  modes.lambda0 = pairs[0].value;
  modes.lambda1 = pairs.size() > 1 ? pairs[1].value : std::numeric_limits<double>::infinity();
  const double scale = 1.0 / std::sqrt(modes.grid.cell_area());
  double sum = 0.0;
  for (double x : pairs[0].vector) sum += x;
  const double sign = sum < 0 ? -1.0 : 1.0;
  modes.u0.resize(pairs[0].vector.size());
  for (std::size_t i = 0; i < modes.u0.size(); ++i) modes.u0[i] = sign * scale * pairs[0].vector[i];
  return modes;
}

std::vector<Vec2> section_gradient(const SectionGrid& grid, std::span<const double> u) {
  std::vector<Vec2> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      double acc = 0.0;
      for (const auto& t : gradient_stencil(grid, static_cast<int>(i), axis)) acc += t.coef * u[t.index];
      out[i][axis] = acc;
    }
  }
  return out;
}

std::vector<double> rim_weights(const SectionGrid& grid) {
  const double h = grid.step;
  std::vector<double> w(grid.size(), h * h);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int d = 0; d < 4; ++d)
      if (grid.neighbor[i][d] < 0) w[i] += h * (grid.gap[i][d] - 0.5 * h);
  for (double& x : w) x = std::max(x, 0.0);
  return w;
}

SectionConstants constants(const SectionModes& modes) {
  const auto grad = section_gradient(modes.grid, modes.u0);
  const auto weight = rim_weights(modes.grid);
  const double area = modes.grid.cell_area();
  SectionConstants c;
  for (std::size_t i = 0; i < modes.grid.size(); ++i) {
    const auto& y = modes.grid.points[i];
    const double rot = -grad[i][0] * y[1] + grad[i][1] * y[0];  // <grad u0, R y>
    const double rad = grad[i][0] * y[0] + grad[i][1] * y[1];   // <grad u0, y>
    const double u2 = modes.u0[i] * modes.u0[i];
    c.c1 += rot * rot * weight[i];
    c.c2 += rad * rad * weight[i];
    c.c3 += rot * rad * weight[i];
    c.f[0] += y[0] * u2 * area;
    c.f[1] += y[1] * u2 * area;
  }
  c.rho_s = modes.domain.rho();
  return c;
}

double perturbed_lowest(const SectionModes& modes, const Vec2& xi) {
  const double rho = modes.domain.rho();
  if (std::hypot(xi[0], xi[1]) * rho >= 1.0)
    throw std::invalid_argument("perturbed_lowest: 1 - xi.y is not positive on the section");
  if (xi[0] == 0.0 && xi[1] == 0.0) return modes.lambda0;
  const auto weight = [&](const Vec2& y) { return 1.0 - xi[0] * y[0] - xi[1] * y[1]; };
  auto a = section_stiffness(modes.grid, weight);
  std::vector<double> mass(modes.grid.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = weight(modes.grid.points[i]);
  a.set_mass(std::move(mass));
  return lowest_pairs(a, 1)[0].value;
}

double perturbed_lowest(const CrossSectionDomain& domain, const Vec2& xi, int n) {
  return perturbed_lowest(solve_modes(domain, n), xi);
}

double gamma(const TubeGeometry& g, const SectionModes& modes, double s, double eps) {
  const double scale = eps * g.profile(s) * g.curvature(s);
  if (scale == 0.0) return 0.0;
  const auto z = z_alpha(g.rotation(s));
  const double lambda = perturbed_lowest(modes, {scale * z[0], scale * z[1]});
  return (lambda - modes.lambda0) / (eps * eps);
}

void export_modes(const SectionModes& modes, const SectionConstants& consts, const std::string& stem) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  const auto& g = modes.grid;
  std::vector<double> full(static_cast<std::size_t>(g.nx) * g.ny, 0.0);
  // Row-major in y1: node (i, j) lands at j * nx + i.
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      if (const int u = g.index[static_cast<std::size_t>(i) * g.ny + j]; u >= 0)
        full[static_cast<std::size_t>(j) * g.nx + i] = modes.u0[u];

  const std::string bin_path = stem + ".bin";
  {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + bin_path);
    bin.write(reinterpret_cast<const char*>(full.data()), static_cast<std::streamsize>(full.size() * sizeof(double)));
  }
  nlohmann::json j;
  j["domain"] = modes.domain.describe();
  j["resolution"] = modes.resolution;
  j["grid"] = {{"x0", g.x0}, {"y0", g.y0}, {"step", g.step}, {"nx", g.nx}, {"ny", g.ny}, {"interior_nodes", g.size()}};
  j["lambda0"] = modes.lambda0;
  j["lambda1"] = modes.lambda1;
  j["constants"] = {{"C1", consts.c1}, {"C2", consts.c2}, {"C3", consts.c3},
                    {"F", {consts.f[0], consts.f[1]}}, {"rho_S", consts.rho_s}};
  j["u0_file"] = bin_path;
  j["u0_layout"] = "float64 little-endian, ny rows of nx values, zero outside S";
  std::ofstream out(stem + ".json");
  if (!out) throw std::runtime_error("cannot write " + stem + ".json");
  out << j.dump(2) << '\n';
}

}  // namespace thintube

#pragma once

#include "thintube/geometry.hpp"
#include "thintube/numerics.hpp"

#include <array>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace thintube {

/// Cross-section could not be discretized (empty mask, degenerate shape).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Disk {
  double radius = 1.0;
  Vec2 center{0.0, 0.0};
};

struct Rectangle {
  Vec2 x_range{0.0, 1.0};
  Vec2 y_range{0.0, 1.0};
};

struct Polygon {
  std::vector<Vec2> vertices;
};

/// Open bounded section S. Membership is strict: points on the boundary are
/// outside.
class CrossSectionDomain {
 public:
  using Shape = std::variant<Disk, Rectangle, Polygon>;

  static CrossSectionDomain disk(double radius, Vec2 center = {0.0, 0.0});
  static CrossSectionDomain rectangle(Vec2 x_range, Vec2 y_range);
  /// Throws std::invalid_argument for fewer than three vertices, zero area
  /// or crossing edges.
  static CrossSectionDomain polygon(std::vector<Vec2> vertices);

  const Shape& shape() const { return shape_; }
  bool contains(const Vec2& y) const;
  /// Distance from an interior point to the boundary along the ray in
  /// direction `dir` (0: +y1, 1: -y1, 2: +y2, 3: -y2).
  double boundary_distance(const Vec2& p, int dir) const;
  /// [x0, x1, y0, y1]
  std::array<double, 4> bounding_box() const;
  /// rho_S = sup_{y in S} |y|
  double rho() const;
  std::string describe() const;

 private:
  explicit CrossSectionDomain(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

/// Uniform grid over the bounding box of S; unknowns are the nodes strictly
/// inside S. Directions are ordered +y1, -y1, +y2, -y2.
struct SectionGrid {
  double x0 = 0.0, y0 = 0.0, step = 0.0;
  int nx = 0, ny = 0;                     // node counts per axis
  std::vector<int> index;                 // node (i * ny + j) -> unknown, -1 outside
  std::vector<Vec2> points;               // per unknown
  std::vector<std::array<int, 4>> neighbor;     // unknown index or -1
  std::vector<std::array<double, 4>> gap;       // step, or the distance to the boundary

  std::size_t size() const { return points.size(); }
  double cell_area() const { return step * step; }
};

struct StencilTerm {
  int index;
  double coef;
};

/// Derivative along y1 (axis 0) or y2 (axis 1) at an unknown: three-point
/// formula through the neighbours, using the boundary point (value 0) in
/// place of a missing neighbour. Central difference when both are interior.
std::vector<StencilTerm> gradient_stencil(const SectionGrid& grid, int unknown, int axis);

/// Builds the masked grid with `n` intervals across the longer side of the
/// bounding box. Throws DomainError when no node falls inside S.
SectionGrid build_section_grid(const CrossSectionDomain& domain, int n);

/// Dirichlet form sum_edges w_e (u_i - u_j)^2 / h^2 per unit area, with
/// w_e = weight(edge midpoint); omitted boundary edges contribute
/// w_e u_i^2 / (h d) where d is the distance to the boundary.
numerics::SparseSymmetric section_stiffness(const SectionGrid& grid,
                                            const std::function<double(const Vec2&)>& weight = {});

struct SectionModes {
  CrossSectionDomain domain;
  int resolution = 0;
  SectionGrid grid;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  std::vector<double> u0;  // positive, sum u0^2 * cell_area = 1
};

struct SectionConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  Vec2 f{0.0, 0.0};
  double rho_s = 0.0;
};

/// Residual tolerance used for section solves, relative to ||A||_inf.
inline constexpr double kSectionRelativeTolerance = 1e-12;

/// Two lowest Dirichlet eigenpairs of S on the masked grid. n >= 16.
SectionModes solve_modes(const CrossSectionDomain& domain, int n);

/// Node quadrature weights for integrands that do not vanish on the
/// boundary: the cell area plus, per missing neighbour, the strip between the
/// cell edge and the boundary point (negative when the boundary cuts the cell).
std::vector<double> rim_weights(const SectionGrid& grid);

/// C1, C2, C3, F and rho_S by node quadrature, with Ry = (-y2, y1).
/// The gradient integrals use rim_weights; F uses the plain cell area.
SectionConstants constants(const SectionModes& modes);

/// Per-unknown gradient of a grid function using gradient_stencil.
std::vector<Vec2> section_gradient(const SectionGrid& grid, std::span<const double> u);

/// Lowest eigenvalue of -div[(1 - xi.y) grad u] = lambda (1 - xi.y) u.
/// Throws std::invalid_argument if the weight is not positive on S.
double perturbed_lowest(const CrossSectionDomain& domain, const Vec2& xi, int n);
double perturbed_lowest(const SectionModes& modes, const Vec2& xi);

/// gamma_eps(s) = (lambda(eps h k z_alpha) - lambda0) / eps^2 on the modes' grid.
double gamma(const TubeGeometry& g, const SectionModes& modes, double s, double eps);

/// Writes `<stem>.json` (metadata, eigenvalues, constants) and `<stem>.bin`
/// (u0 on the full nx * ny node grid, row-major in y1, little-endian double,
/// zero outside S).
void export_modes(const SectionModes& modes, const SectionConstants& consts, const std::string& stem);

}  // namespace thintube

#pragma once

#include "thintube/cross_section.hpp"
#include "thintube/effective1d.hpp"
#include "thintube/geometry.hpp"
#include "thintube/numerics.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thintube {

/// Tensor grid over a window of I and the masked section grid. Unknown
/// (plane, node) sits at plane * section.size() + node.
struct Grid3D {
  Window window;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  double ds = 0.0;
  std::vector<double> s;         // planes carrying unknowns
  std::vector<double> s_weight;  // ds, or ds/2 on Neumann end planes
  SectionGrid section;

  std::size_t planes() const { return s.size(); }
  std::size_t size() const { return s.size() * section.size(); }
  std::size_t index(std::size_t plane, std::size_t node) const { return plane * section.size() + node; }
  double cell_weight(std::size_t plane) const { return s_weight[plane] * section.cell_area(); }
};

/// Planes at window.left + i ds, ds = length / (n_s + 1): i = 1..n_s for
/// Dirichlet, i = 0..n_s+1 for Neumann. Same nodes as assemble_T with n = n_s.
Grid3D make_grid3d(const Window& window, std::size_t n_s, const SectionGrid& section,
                   BoundaryCondition bc = BoundaryCondition::Dirichlet);

struct AssembledForm {
  numerics::SparseSymmetric stiffness;
  std::vector<double> mass_diag;
  double eps = 0.0;
  double c = 0.0;
  bool weighted = false;  // ghat: 1/beta longitudinal weight, beta mass
};

/// g_eps on the grid: D^T Q D for the longitudinal operator
///   v' - (h'/h) v + (tau + alpha') Ry.grad v - (h'/h) y.grad v
/// (differences across planes, averages at the s-midpoints), plus
/// beta |grad_y v|^2 / (eps^2 h^2), plus (c - lambda0 beta / (eps^2 M^2)) |v|^2.
/// Throws SingularityError where beta_eps <= 0.
AssembledForm assemble_g(const TubeGeometry& g, const SectionModes& modes, const Grid3D& grid, double eps,
                         double c);

/// ghat_eps: longitudinal weight 1/beta, zeroth-order term
/// (c - lambda0 / (eps^2 M^2)) beta, mass beta * cell.
AssembledForm assemble_ghat(const TubeGeometry& g, const SectionModes& modes, const Grid3D& grid, double eps,
                            double c);

/// Lowest eigenpairs of the form against its mass. tol = 0 picks a residual
/// tolerance relative to the matrix scale.
std::vector<numerics::EigenPair> spectrum3d(const AssembledForm& form, std::size_t count, double tol = 0.0);

/// v(s, y) = w(s) u0(y) on the grid.
std::vector<double> product_field(const Grid3D& grid, std::span<const double> w, std::span<const double> u0);

/// x^T A x for the stiffness of a form.
double form_value(const AssembledForm& form, std::span<const double> x);

/// Section data as the 3D restriction to w(s) u0(y) sees it: C1, C2, C3 are
/// the cell sums of the same stencils the 3D assembly uses, so the 1D
/// operator and the restricted form agree up to the s-discretization.
SectionData reduction_section_data(const SectionModes& modes);

/// Coordinate text: "n nnz" then one "row col value" line per stored upper
/// triangle entry, 0-based, values with 17 significant digits.
void export_matrix(const numerics::SparseSymmetric& a, const std::string& path);

struct Tube3DOptions {
  std::size_t n_s = 96;  // interior planes
  int section_n = 24;
  std::size_t coarse_n_s = 72;
  int coarse_section_n = 18;
  double spread_limit = 0.3;
};

struct Tube3DRow {
  double eps = 0.0;
  std::size_t j = 0;
  double l_hat = 0.0;         // l_j(Ghat)
  double l_other = 0.0;       // l_j(G) or l_j(T)
  double difference = 0.0;    // |1/l_hat - 1/l_other| on the default grid
  double coarse_difference = 0.0;
  double spread = 0.0;        // |difference - coarse_difference| / difference
  double d = 0.0;             // coercivity constant c - max|theta| - max k^2/(4 M^2)
};

struct Tube3DReport {
  std::string kind;  // "form_comparison" or "reduction"
  std::vector<Tube3DRow> rows;
  std::vector<std::optional<numerics::RateFit>> fits;  // per j; empty when a difference vanishes
  bool grid_limited = false;
  bool all_zero = false;
  std::vector<std::string> notes;
};

/// e_j = |l_j(Ghat)^-1 - l_j(G)^-1| over the eps list on the default and the
/// coarse grid. Eigenvalue differences of the inverses witness, and do not
/// prove, the operator-norm resolvent bound.
Tube3DReport form_comparison_check(const TubeGeometry& g, const CrossSectionDomain& domain,
                                   std::span<const double> eps_list, std::size_t j_max,
                                   const Tube3DOptions& options = {});

/// e_j = |l_j(Ghat)^-1 - l_j(T_{eps,c})^-1| with T on the same s-grid and
/// reduction_section_data.
Tube3DReport reduction_check(const TubeGeometry& g, const CrossSectionDomain& domain,
                             std::span<const double> eps_list, std::size_t j_max,
                             const Tube3DOptions& options = {});

}  // namespace thintube

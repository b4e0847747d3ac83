#pragma once

#include "thintube/cross_section.hpp"
#include "thintube/geometry.hpp"
#include "thintube/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thintube {

/// eps is outside the range where zeta_eps stays above the guard.
class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No window up to the configured cap confines the requested eigenvalues.
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryCondition { Dirichlet, Neumann };

const char* to_string(BoundaryCondition bc);

/// Cross-section data the 1D reduction depends on.
struct SectionData {
  double lambda0 = 0.0;
  SectionConstants constants;
};

/// theta = C1 (tau + alpha')^2 + (C2 - 1) (h'/h)^2 - 2 C3 (tau + alpha') h'/h
double theta(const TubeGeometry& g, const SectionConstants& c, double s);
/// zeta_eps = 1 - eps k h <z_alpha, F>
double zeta(const TubeGeometry& g, const SectionConstants& c, double s, double eps);
/// max |theta| + max(k^2 / 4) / M^2 + 1 over the nodes.
double c_constant(const TubeGeometry& g, const SectionConstants& c, std::span<const double> nodes);
/// W_eps = theta + c + zeta_eps * lambda0 (1/h^2 - 1/M^2) / eps^2
double potential_W(const TubeGeometry& g, const SectionData& section, double s, double eps, double c);

struct Window {
  double left = -1.0;
  double right = 1.0;
  double length() const { return right - left; }
};

/// The interval itself when bounded; throws std::invalid_argument otherwise.
Window bounded_window(const Interval& interval);

struct EffectivePotential {
  std::vector<double> s;
  std::vector<double> theta;
  std::vector<double> zeta;
  std::vector<double> w;
  double c = 0.0;
  double eps = 0.0;
  double step = 0.0;
};

struct Operator1D {
  EffectivePotential potential;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  numerics::TridiagonalMatrix matrix;
  Window window;
  bool dilated = false;  // assembled by assemble_scaled
  std::vector<std::string> warnings;
};

struct AssembleOptions {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  /// Interior node count for Dirichlet (Neumann adds both endpoints).
  /// 0 picks max(64, the smallest n with step <= sqrt(eps)/20).
  std::size_t n = 0;
  double delta = 0.1;
  /// Overrides c_constant when set.
  std::optional<double> c;
};

/// Default interior node count for a window at this eps.
std::size_t default_nodes(const Window& window, double eps);

/// -w'' + W_eps w by three-point differences on nodes left + i * step,
/// step = length / (n + 1): i = 1..n for Dirichlet, i = 0..n+1 for Neumann
/// (mirror ghosts, symmetrized so the Dirichlet matrix is a principal
/// submatrix). Throws AdmissibilityError when zeta_eps <= delta on a node.
Operator1D assemble_T(const TubeGeometry& g, const SectionData& section, double eps, const Window& window,
                      const AssembleOptions& options = {});

/// The scaled operator eps J T J^{-1} assembled directly on the dilated
/// nodes sigma = s / sqrt(eps) with potential eps W_eps(sqrt(eps) sigma).
Operator1D assemble_scaled(const TubeGeometry& g, const SectionData& section, double eps, const Window& window,
                           const AssembleOptions& options = {});

/// Lowest `count` eigenvalues of an assembled operator.
std::vector<double> spectrum(const Operator1D& op, std::size_t count);

/// eps (l_j(T_{eps,c}) - c) for j = 0..j_max. Throws std::invalid_argument
/// when j_max is not below the matrix dimension.
std::vector<double> scaled_spectrum(const Operator1D& op, std::size_t j_max);

struct WEOSpec {
  double lambda0 = 0.0;
  double max_profile = 0.0;
  double kappa() const { return 2.0 * lambda0 / (max_profile * max_profile * max_profile); }
};

/// mu_j = (2j + 1) sqrt(2 lambda0 / M^3), j = 0..j_max
std::vector<double> weo_spectrum_exact(const WEOSpec& spec, std::size_t j_max);

struct NumericSpectrum {
  std::vector<double> values;
  std::vector<std::string> warnings;
};

/// Three-point eigenvalues of -u'' + kappa s^2 on [-L, L] with n interior
/// nodes and Dirichlet ends. Requires kappa L^2 > 10 mu_{j_max}.
NumericSpectrum weo_spectrum_numeric(double kappa, double half_width, std::size_t n, std::size_t j_max);
NumericSpectrum weo_spectrum_numeric(const WEOSpec& spec, double half_width, std::size_t n, std::size_t j_max);

struct AutoWindowOptions {
  double cap = 1e3;
  double start = 1e-2;
  double growth = 1.02;
};

/// Smallest symmetric window (on a geometric scan) with
/// eps (W_eps - c) >= 10 mu_{target_j} at both ends. Bounded intervals are
/// returned unchanged. Throws WindowError past the cap.
Window auto_window(const TubeGeometry& g, const SectionData& section, double eps, std::size_t target_j,
                   const AutoWindowOptions& options = {});

/// CSV with columns s, theta, zeta, W.
std::string potential_csv(const EffectivePotential& p);
/// JSON with the potential samples, c, eps and an optional spectrum.
std::string potential_json(const EffectivePotential& p, std::span<const double> spectrum = {});

}  // namespace thintube

#pragma once

#include "thintube/cross_section.hpp"
#include "thintube/effective1d.hpp"
#include "thintube/geometry.hpp"
#include "thintube/numerics.hpp"
#include "thintube/tube3d.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thintube {

/// The study inputs violate a hypothesis of the asymptotic result
/// (for example a profile without a single nondegenerate maximum).
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid study configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry as catalog or expression strings (see ScalarFunction::parse).
struct GeometrySpec {
  std::string curvature = "0";
  std::string torsion = "0";
  std::string rotation = "0";
  std::string profile = "2 - s^2";
  bool unbounded = false;
  double a = 1.0;  // I = (-a, b)
  double b = 1.0;

  TubeGeometry build() const;
};

struct SectionSpec {
  std::string shape = "disk";  // disk | rectangle | polygon
  double radius = 1.0;
  Vec2 center{0.0, 0.0};
  Vec2 x_range{0.0, 1.0};
  Vec2 y_range{0.0, 1.0};
  std::vector<Vec2> vertices;
  int n = 96;

  CrossSectionDomain build() const;
};

struct StudyConfig {
  GeometrySpec geometry;
  SectionSpec section;
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025, 0.0125};
  std::size_t j_max = 2;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  std::size_t n = 0;  // 1D interior nodes, 0 = default_nodes
  double delta = 0.1;
  AutoWindowOptions window;
  Tube3DOptions tube3d;
  std::string csv_path;
  std::string json_path;

  /// Checks list ordering, j_max and eps < epsilon_max; throws ConfigError.
  void validate() const;
};

struct ReportRow {
  double eps = 0.0;
  std::size_t j = 0;
  double scaled = 0.0;     // eps (l_j(T_eps) - c)
  double mu = 0.0;
  double abs_error = 0.0;
  std::size_t grid_n = 0;
  double window_L = 0.0;   // half-width of the computational window
  double c = 0.0;
  bool below_tolerance = false;  // abs_error under the solver resolution

  bool operator==(const ReportRow&) const = default;
};

struct RowFailure {
  double eps = 0.0;
  std::string stage;
  std::string reason;

  bool operator==(const RowFailure&) const = default;
};

struct LimitEstimate {
  std::size_t j = 0;
  double limit = 0.0;
  double mu = 0.0;
  double deviation = 0.0;  // |limit - mu| / mu
  double order = 0.0;      // order used for the extrapolation
  bool order_fitted = false;

  bool operator==(const LimitEstimate&) const = default;
};

struct ConvergenceReport {
  std::string study;
  std::string boundary;
  double lambda0 = 0.0;
  double max_profile = 0.0;
  double kappa = 0.0;
  int section_n = 0;
  double delta = 0.0;
  std::vector<ReportRow> rows;
  std::vector<RowFailure> failures;
  std::vector<LimitEstimate> limits;
  std::vector<std::optional<numerics::RateFit>> fits;  // per j, of abs_error
  bool out_of_hypothesis = false;
  std::vector<std::string> notes;

  bool complete() const { return failures.empty(); }
  bool operator==(const ConvergenceReport&) const = default;
};

/// eps (l_j(T_eps) - c) against mu_j over the eps list, rows computed
/// concurrently; the limit is extrapolated from the last three eps with the
/// empirical order. Throws HypothesisError when the profile fails
/// validate_deformation.
ConvergenceReport sweep_theorem11(const StudyConfig& cfg);

/// The same study with Neumann ends. A profile outside the hypotheses is
/// run anyway and flagged out_of_hypothesis.
ConvergenceReport neumann_variant(const StudyConfig& cfg);

/// Largest relative difference of the extrapolated limits for j <= j_max.
double limit_spread(const ConvergenceReport& a, const ConvergenceReport& b, std::size_t j_max);

/// |eps l_j - mu_j| nonincreasing over the last three eps of the sweep.
bool errors_monotone(const ConvergenceReport& report, std::size_t j);

struct EssentialRow {
  double eps = 0.0;
  double l0 = 0.0;         // l_0(T_eps)
  double threshold = 0.0;  // lambda0 / eps^2 (1/N^2 - 1/M^2)
  bool certified = false;
  std::size_t below = 0;   // eigenvalues of T_eps under the threshold
  double window_L = 0.0;
  double doubled_shift = 0.0;  // relative change of l_0 when L doubles
  bool stable = false;
  bool solved = false;  // false when a stage threw; reason names it
  std::string reason;
};

struct EssentialReport {
  double lambda0 = 0.0;
  double max_profile = 0.0;
  double limsup = 0.0;  // N
  bool out_of_hypothesis = false;
  std::vector<EssentialRow> rows;
  std::vector<std::string> notes;
};

/// Certifies l_0(T_eps) below the essential threshold with a window-doubling
/// stability check. Needs I = R.
EssentialReport essential_spectrum_check(const StudyConfig& cfg);

/// Extrapolated limits with k(s) replaced by k(s / f) for each stretch
/// factor f (reported, not asserted).
struct DecaySensitivity {
  std::vector<double> factors;
  std::vector<std::vector<double>> limits;  // [factor][j]
  double max_relative_change = 0.0;
};
DecaySensitivity decay_sensitivity(const StudyConfig& cfg, const std::vector<double>& factors);

enum class ReportFormat { Csv, Json };

/// CSV columns: epsilon, j, scaled_eigenvalue, mu_j, abs_error, grid_n,
/// window_L (12 significant digits). JSON carries every report field.
std::string report_csv(const ConvergenceReport& report);
std::string report_json(const ConvergenceReport& report);
ConvergenceReport report_from_json(const std::string& text);
void emit_report(const ConvergenceReport& report, ReportFormat format, const std::string& path);

std::string essential_json(const EssentialReport& report);
std::string tube3d_json(const Tube3DReport& report);

/// Worker count for per-eps concurrency: THINTUBE_THREADS when set and
/// positive, otherwise the hardware concurrency.
unsigned worker_count();

}  // namespace thintube

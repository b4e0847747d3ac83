#include "thintube/effective1d.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>

using namespace thintube;
using std::numbers::pi;

namespace {

TubeGeometry bounded_tube(const std::string& k, const std::string& tau, const std::string& alpha, const std::string& h) {
  TubeGeometry g;
  g.interval = Interval::bounded(1, 1);
  g.curvature = ScalarFunction::parse(k);
  g.torsion = ScalarFunction::parse(tau);
  g.rotation = ScalarFunction::parse(alpha);
  g.profile = ScalarFunction::parse(h);
  return g;
}

const SectionData& disk_section() {
  static const SectionData data = [] {
    const auto modes = solve_modes(CrossSectionDomain::disk(1.0), 48);
    return SectionData{modes.lambda0, constants(modes)};
  }();
  return data;
}

SectionData synthetic_section() {
  SectionData d;
  d.lambda0 = 2 * pi * pi;
  d.constants.c1 = 0.3;
  d.constants.c2 = 2.5;
  d.constants.c3 = 0.2;
  d.constants.f = {0.5, 0.5};
  d.constants.rho_s = std::sqrt(2.0);
  return d;
}

}  // namespace

TEST_CASE("theta") {
  const auto c = synthetic_section().constants;
  auto g = bounded_tube("const{0}", "const{0}", "const{0}", "const{2}");
  CHECK(theta(g, c, 0.4) == 0.0);

  g.torsion = ScalarFunction::constant(1.0);
  CHECK(theta(g, c, 0.4) == doctest::Approx(c.c1));

  auto disk = c;
  disk.c1 = disk.c3 = 0.0;
  g = bounded_tube("const{0}", "0.7*s", "sin(s)", "parabola_cap{2}");
  const double s = 0.3, ls = -2 * s / (2 - s * s);
  CHECK(theta(g, disk, s) == doctest::Approx((disk.c2 - 1) * ls * ls));

  // Full formula with twist tau + alpha' = 0.7 s + cos(s).
  const double tw = 0.7 * s + std::cos(s);
  CHECK(theta(g, c, s) == doctest::Approx(c.c1 * tw * tw + (c.c2 - 1) * ls * ls - 2 * c.c3 * tw * ls).epsilon(1e-8));
}

TEST_CASE("zeta") {
  auto c = synthetic_section().constants;
  auto g = bounded_tube("const{1}", "const{0}", "const{0}", "const{1}");
  CHECK(zeta(g, c, 0.2, 0.1) == doctest::Approx(0.95));

  g.curvature = ScalarFunction::constant(0.0);
  CHECK(zeta(g, c, 0.2, 0.1) == 1.0);

  g.curvature = ScalarFunction::constant(1.0);
  c.f = {0.0, 0.0};
  CHECK(zeta(g, c, 0.2, 0.1) == 1.0);
}

TEST_CASE("c constant") {
  const auto c = synthetic_section().constants;
  const std::vector<double> nodes = {-0.5, 0.0, 0.5};
  auto g = bounded_tube("const{0}", "const{0}", "const{0}", "const{2}");
  CHECK(c_constant(g, c, nodes) == doctest::Approx(1.0));

  g.curvature = ScalarFunction::constant(1.0);
  CHECK(c_constant(g, c, nodes) == doctest::Approx(1.0625));

  g = bounded_tube("gauss_bump{0.8}", "0.3", "0.5*s", "parabola_cap{2}");
  std::vector<double> grid;
  for (int i = 0; i <= 1000; ++i) grid.push_back(-1 + 2 * i / 1000.0);
  double th = 0, k2 = 0;
  for (double s : grid) {
    const double tw = 0.3 + 0.5, ls = -2 * s / (2 - s * s);
    th = std::max(th, std::abs(c.c1 * tw * tw + (c.c2 - 1) * ls * ls - 2 * c.c3 * tw * ls));
    const double k = 0.8 * std::exp(-s * s);
    k2 = std::max(k2, k * k / 4);
  }
  CHECK(c_constant(g, c, grid) == doctest::Approx(th + k2 / 4 + 1).epsilon(1e-8));
}

TEST_CASE("potential W") {
  const auto sec = synthetic_section();
  auto g = bounded_tube("const{0}", "const{0}", "const{0}", "parabola_cap{2}");
  const double eps = 0.05, c = 1.7;
  CHECK(potential_W(g, sec, 0.0, eps, c) == doctest::Approx(theta(g, sec.constants, 0.0) + c));

  const double s = 0.01;
  const double bracket = eps * eps * (potential_W(g, sec, s, eps, c) - theta(g, sec.constants, s) - c);
  CHECK(bracket == doctest::Approx(2 * sec.lambda0 / 8 * s * s).epsilon(1e-4));

  g = bounded_tube("0.5+0.2*s", "0.1", "0.3*s", "parabola_cap{2}");
  for (double x : {-0.9, -0.3, 0.2, 0.8}) {
    for (double e : {0.2, 0.05}) CHECK(potential_W(g, sec, x, e, c) >= theta(g, sec.constants, x) + c);
    const auto reduced = [&](double e) {
      return e * e * (potential_W(g, sec, x, e, c) - theta(g, sec.constants, x) - c) / zeta(g, sec.constants, x, e);
    };
    CHECK(reduced(0.2) == doctest::Approx(reduced(0.01)).epsilon(1e-12));
  }
}

TEST_CASE("constant potential: Dirichlet closed form and Neumann constant mode") {
  TubeGeometry g;
  g.interval = Interval::bounded(1, 1);
  g.profile = ScalarFunction::constant(1.0);
  const double w0 = 3.25;
  AssembleOptions opt;
  opt.n = 200;
  opt.c = w0;
  const Window window{0.0, pi};
  const auto op = assemble_T(g, synthetic_section(), 0.1, window, opt);
  const auto values = spectrum(op, 5);
  const double d = pi / 201.0;
  for (int j = 1; j <= 5; ++j)
    CHECK(values[j - 1] == doctest::Approx(4 / (d * d) * std::pow(std::sin(j * d / 2), 2) + w0).epsilon(1e-12));

  opt.bc = BoundaryCondition::Neumann;
  const auto neu = assemble_T(g, synthetic_section(), 0.1, window, opt);
  CHECK(neu.matrix.size() == 202);
  CHECK(spectrum(neu, 1)[0] == doctest::Approx(w0).epsilon(1e-12));
}

TEST_CASE("Neumann eigenvalues lie below Dirichlet ones on the same grid") {
  const auto g = bounded_tube("0.6", "0.4", "0.2*s", "parabola_cap{2}");
  for (double eps : {0.1, 0.05}) {
    AssembleOptions opt;
    opt.c = 2.0;
    const auto dir = spectrum(assemble_T(g, disk_section(), eps, bounded_window(g.interval), opt), 4);
    opt.bc = BoundaryCondition::Neumann;
    const auto neu = spectrum(assemble_T(g, disk_section(), eps, bounded_window(g.interval), opt), 4);
    for (int j = 0; j < 4; ++j) CHECK(neu[j] <= dir[j]);
  }
}

TEST_CASE("straight tube with a disk section") {
  const auto g = bounded_tube("const{0}", "const{0}", "const{0}", "parabola_cap{2}");
  const auto op = assemble_T(g, disk_section(), 0.05, bounded_window(g.interval));
  CHECK(op.warnings.empty());
  const auto values = spectrum(op, 3);
  for (double v : values) CHECK(v >= op.potential.c);
  const auto scaled = scaled_spectrum(op, 2);
  const auto mu = weo_spectrum_exact({disk_section().lambda0, 2.0}, 2);
  for (int j = 0; j < 3; ++j) CHECK(scaled[j] == doctest::Approx(mu[j]).epsilon(0.1));
}

TEST_CASE("dilation identity on matched grids") {
  const auto g = bounded_tube("0.5*cos(s)", "0.3", "0.2*s", "parabola_cap{2}");
  for (double eps : {0.1, 0.02}) {
    const auto t = assemble_T(g, disk_section(), eps, bounded_window(g.interval));
    const auto that = assemble_scaled(g, disk_section(), eps, bounded_window(g.interval));
    const auto a = scaled_spectrum(t, 4), b = scaled_spectrum(that, 4);
    for (int j = 0; j < 5; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-8));
  }
}

TEST_CASE("scaled spectrum errors and warnings") {
  const auto g = bounded_tube("const{0}", "const{0}", "const{0}", "parabola_cap{2}");
  AssembleOptions opt;
  opt.n = 64;
  const auto op = assemble_T(g, disk_section(), 1e-4, bounded_window(g.interval), opt);
  CHECK_FALSE(op.warnings.empty());
  CHECK_THROWS_AS(scaled_spectrum(op, 64), std::invalid_argument);
  opt.n = 10;
  CHECK_THROWS_AS(assemble_T(g, disk_section(), 0.1, bounded_window(g.interval), opt), std::invalid_argument);
}

TEST_CASE("zeta guard is a hard error") {
  const auto g = bounded_tube("const{4}", "const{0}", "const{0}", "parabola_cap{2}");
  CHECK_THROWS_AS(assemble_T(g, synthetic_section(), 0.3, bounded_window(g.interval)), AdmissibilityError);
  CHECK_NOTHROW(assemble_T(g, synthetic_section(), 0.02, bounded_window(g.interval)));
}

TEST_CASE("WEO closed form") {
  const auto mu = weo_spectrum_exact({2 * pi * pi, 2.0}, 5);
  CHECK(mu[0] == doctest::Approx(pi / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(mu[0] == doctest::Approx(2.221441).epsilon(1e-6));
  for (int j = 0; j < 5; ++j) CHECK(mu[j + 1] - mu[j] == doctest::Approx(2 * mu[0]));
  const auto quad = weo_spectrum_exact({8 * pi * pi, 2.0}, 5);
  for (int j = 0; j <= 5; ++j) CHECK(quad[j] == doctest::Approx(2 * mu[j]));
  CHECK_THROWS_AS(weo_spectrum_exact({0.0, 2.0}, 1), std::invalid_argument);
}

TEST_CASE("WEO numeric spectrum") {
  const auto extrapolated = [](double kappa) {
    const auto a = weo_spectrum_numeric(kappa, 12.0, 4000, 5);
    const auto b = weo_spectrum_numeric(kappa, 12.0, 8001, 5);
    CHECK(a.warnings.empty());
    std::vector<double> out;
    for (int j = 0; j <= 5; ++j) out.push_back(numerics::richardson(a.values[j], b.values[j], 2.0, 2.0));
    return out;
  };
  const auto one = extrapolated(1.0);
  for (int j = 0; j <= 5; ++j) CHECK(one[j] == doctest::Approx(2 * j + 1).epsilon(1e-6));
  const auto four = extrapolated(4.0);
  for (int j = 0; j <= 5; ++j) CHECK(four[j] == doctest::Approx(2 * one[j]).epsilon(1e-6));

  CHECK_FALSE(weo_spectrum_numeric(1.0, 4.5, 400, 0).warnings.empty());
  CHECK_THROWS_AS(weo_spectrum_numeric(1.0, 2.0, 400, 3), std::invalid_argument);
}

TEST_CASE("auto window on the line") {
  TubeGeometry g;
  g.interval = Interval::real_line();
  g.curvature = ScalarFunction::parse("gauss_bump{0.5}");
  g.torsion = ScalarFunction::constant(0.2);
  g.profile = ScalarFunction::rational_cap(2.0);
  const auto& sec = disk_section();

  const auto w = auto_window(g, sec, 0.05, 2);
  CHECK(std::isfinite(w.right));
  CHECK(w.left == -w.right);

  AssembleOptions opt;
  opt.n = default_nodes(w, 0.05);
  if (opt.n % 2 == 0) ++opt.n;
  const auto base = scaled_spectrum(assemble_T(g, sec, 0.05, w, opt), 0);
  opt.n = 2 * opt.n + 1;
  const auto doubled = scaled_spectrum(assemble_T(g, sec, 0.05, Window{2 * w.left, 2 * w.right}, opt), 0);
  CHECK(doubled[0] == doctest::Approx(base[0]).epsilon(1e-8));

  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.05, 0.025, 0.0125, 0.00625}) {
    const double scaled = auto_window(g, sec, eps, 2).right / std::sqrt(eps);
    CHECK(scaled <= prev * (1 + 1e-12));
    prev = scaled;
  }

  CHECK_THROWS_AS(auto_window(g, sec, 0.2, 2), WindowError);

  const auto bounded = bounded_tube("0", "0", "0", "parabola_cap{2}");
  const auto same = auto_window(bounded, sec, 0.05, 2);
  CHECK(same.left == -1.0);
  CHECK(same.right == 1.0);
}

TEST_CASE("scaled lowest eigenvalue stays away from zero") {
  const auto g = bounded_tube("0.8*cos(s)", "0.4", "0.3*s", "parabola_cap{2}");
  for (double eps : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
    const auto op = assemble_T(g, disk_section(), eps, bounded_window(g.interval));
    CHECK(eps * spectrum(op, 1)[0] > 0.5);
  }
}

TEST_CASE("potential export") {
  const auto g = bounded_tube("0.5", "0", "0", "parabola_cap{2}");
  const auto op = assemble_T(g, disk_section(), 0.1, bounded_window(g.interval));
  const auto csv = potential_csv(op.potential);
  CHECK(csv.rfind("s,theta,zeta,W\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == op.potential.s.size() + 1);
  const auto values = spectrum(op, 2);
  const auto j = nlohmann::json::parse(potential_json(op.potential, values));
  CHECK(j["W"].size() == op.potential.s.size());
  CHECK(j["spectrum"].size() == 2);
}

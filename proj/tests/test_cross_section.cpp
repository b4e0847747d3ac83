#include "thintube/cross_section.hpp"

#include <doctest.h>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace thintube;
using std::numbers::pi;

namespace {

double bessel_j0(double x) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -(x * x / 4.0) / (static_cast<double>(k) * k);
    sum += term;
  }
  return sum;
}

double first_bessel_zero() {
  double lo = 2.0, hi = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (bessel_j0(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const CrossSectionDomain kUnitSquare = CrossSectionDomain::rectangle({0, 1}, {0, 1});
const CrossSectionDomain kUnitDisk = CrossSectionDomain::disk(1.0);

// Lowest eigenvalue of the 1D problem -(w u')' = mu w u on (0,1), u(0)=u(1)=0,
// w = 1 - t x, with n intervals; assembled directly.
double weighted_1d_lowest(double t, int n) {
  const double h = 1.0 / n;
  const int m = n - 1;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m), w = Eigen::MatrixXd::Zero(m, m);
  const auto weight = [t](double x) { return 1.0 - t * x; };
  for (int i = 0; i < m; ++i) {
    const double x = (i + 1) * h;
    const double wl = weight(x - h / 2), wr = weight(x + h / 2);
    k(i, i) = (wl + wr) / (h * h);
    if (i + 1 < m) k(i, i + 1) = k(i + 1, i) = -wr / (h * h);
    w(i, i) = weight(x);
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(k, w);
  return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("bessel oracle") { CHECK(first_bessel_zero() == doctest::Approx(2.404826).epsilon(1e-6)); }

TEST_CASE("square, disk and rectangle ground states") {
  const auto sq = solve_modes(kUnitSquare, 64);
  CHECK(sq.lambda0 == doctest::Approx(2 * pi * pi).epsilon(0.005));
  CHECK(sq.lambda1 == doctest::Approx(5 * pi * pi).epsilon(0.005));

  const double j01 = first_bessel_zero();
  const auto disk = solve_modes(kUnitDisk, 96);
  CHECK(disk.lambda0 == doctest::Approx(j01 * j01).epsilon(0.01));

  const auto rect = solve_modes(CrossSectionDomain::rectangle({0, 2}, {0, 1}), 64);
  CHECK(rect.lambda0 == doctest::Approx(1.25 * pi * pi).epsilon(0.005));
}

TEST_CASE("modes invariants") {
  for (const auto& domain : {kUnitSquare, kUnitDisk, CrossSectionDomain::disk(0.7, {0.3, -0.2}),
                             CrossSectionDomain::polygon({{0, 0}, {2, 0}, {1.5, 1}, {0.2, 1.4}})}) {
    CAPTURE(domain.describe());
    const auto m = solve_modes(domain, 48);
    CHECK(m.lambda0 > 0);
    CHECK(m.lambda0 < m.lambda1);
    double norm = 0.0;
    for (double u : m.u0) {
      CHECK(u > 0);
      norm += u * u * m.grid.cell_area();
    }
    CHECK(std::abs(norm - 1.0) < 1e-8);
    const auto c = constants(m);
    CHECK(c.c1 >= 0);
    CHECK(c.c2 >= 0);
    CHECK(c.c3 * c.c3 <= c.c1 * c.c2 * (1 + 1e-12));
  }
}

TEST_CASE("refinement converges monotonically") {
  const double j01 = first_bessel_zero();
  struct Case {
    CrossSectionDomain domain;
    double exact0;
  };
  for (const auto& c : {Case{kUnitSquare, 2 * pi * pi}, Case{kUnitDisk, j01 * j01}}) {
    CAPTURE(c.domain.describe());
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {32, 64, 128}) {
      const double err = std::abs(solve_modes(c.domain, n).lambda0 - c.exact0);
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("richardson extrapolation of lambda0") {
  const double j01 = first_bessel_zero();
  const auto extrapolate = [](const CrossSectionDomain& d) {
    return numerics::richardson(solve_modes(d, 64).lambda0, solve_modes(d, 128).lambda0, 2.0, 2.0);
  };
  CHECK(extrapolate(kUnitSquare) == doctest::Approx(2 * pi * pi).epsilon(5e-4));
  CHECK(extrapolate(kUnitDisk) == doctest::Approx(j01 * j01).epsilon(5e-4));
}

TEST_CASE("domain monotonicity: disk inside square") {
  const auto square = CrossSectionDomain::rectangle({-1, 1}, {-1, 1});
  CHECK(solve_modes(kUnitDisk, 64).lambda0 >= solve_modes(square, 64).lambda0);
}

TEST_CASE("equilateral triangle") {
  const double a = 1.0;
  const auto tri = CrossSectionDomain::polygon({{0, 0}, {a, 0}, {a / 2, a * std::sqrt(3.0) / 2}});
  CHECK(solve_modes(tri, 128).lambda0 == doctest::Approx(16 * pi * pi / (3 * a * a)).epsilon(0.01));
}

TEST_CASE("polygon square matches the rectangle") {
  const auto poly = CrossSectionDomain::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const auto a = solve_modes(poly, 32), b = solve_modes(kUnitSquare, 32);
  CHECK(a.grid.size() == b.grid.size());
  CHECK(a.lambda0 == doctest::Approx(b.lambda0).epsilon(1e-10));
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(CrossSectionDomain::polygon({{0, 0}, {1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(CrossSectionDomain::polygon({{0, 0}, {1, 0}, {2, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(CrossSectionDomain::polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(CrossSectionDomain::disk(0.0), std::invalid_argument);
  CHECK_THROWS_AS(CrossSectionDomain::rectangle({1, 0}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(solve_modes(kUnitSquare, 8), std::invalid_argument);
  CHECK_THROWS_AS(solve_modes(CrossSectionDomain::rectangle({0, 1}, {0, 0.01}), 16), DomainError);

  CHECK(kUnitDisk.rho() == doctest::Approx(1.0));
  CHECK(kUnitSquare.rho() == doctest::Approx(std::sqrt(2.0)));
  CHECK_FALSE(kUnitSquare.contains({1.0, 0.5}));
  CHECK(kUnitSquare.contains({0.5, 0.5}));
}

TEST_CASE("section constants") {
  SUBCASE("centered disk") {
    const auto c = constants(solve_modes(kUnitDisk, 96));
    CHECK(std::abs(c.c1) < 1e-3);
    CHECK(std::abs(c.c3) < 1e-3);
    CHECK(std::abs(c.f[0]) < 1e-3);
    CHECK(std::abs(c.f[1]) < 1e-3);
  }
  SUBCASE("unit square") {
    const auto c = constants(solve_modes(kUnitSquare, 64));
    CHECK(c.f[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(c.f[1] == doctest::Approx(0.5).epsilon(1e-8));

    // Midpoint quadrature of |<grad u0, y>|^2 with u0 = 2 sin(pi y1) sin(pi y2).
    const int q = 2000;
    double c2 = 0.0;
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        const double x = (i + 0.5) / q, y = (j + 0.5) / q;
        const double gx = 2 * pi * std::cos(pi * x) * std::sin(pi * y);
        const double gy = 2 * pi * std::sin(pi * x) * std::cos(pi * y);
        const double r = gx * x + gy * y;
        c2 += r * r / (static_cast<double>(q) * q);
      }
    }
    CHECK(c.c2 == doctest::Approx(c2).epsilon(0.01));
  }
}

TEST_CASE("gradient stencil is exact for quadratics") {
  const auto grid = build_section_grid(kUnitDisk, 24);
  std::vector<double> f(grid.size());
  const auto poly = [](const Vec2& p) { return 1.0 - p[0] * p[0] - p[1] * p[1]; };  // zero on the circle
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = poly(grid.points[i]);
  const auto g = section_gradient(grid, f);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(g[i][0] == doctest::Approx(-2 * grid.points[i][0]).epsilon(1e-7).scale(1.0));
    CHECK(g[i][1] == doctest::Approx(-2 * grid.points[i][1]).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("perturbed lowest eigenvalue") {
  const auto disk = solve_modes(kUnitDisk, 64);
  CHECK(perturbed_lowest(disk, {0, 0}) == disk.lambda0);

  const double ax = perturbed_lowest(disk, {0.1, 0}), ay = perturbed_lowest(disk, {0, 0.1});
  CHECK(ax == doctest::Approx(ay).epsilon(1e-8));
  CHECK(perturbed_lowest(disk, {-0.1, 0}) == doctest::Approx(ax).epsilon(1e-8));
  CHECK(perturbed_lowest(disk, {0.05, -0.07}) == doctest::Approx(perturbed_lowest(disk, {-0.05, 0.07})).epsilon(1e-8));

  const auto box = solve_modes(CrossSectionDomain::rectangle({-1, 1}, {-0.5, 0.5}), 40);
  CHECK(perturbed_lowest(box, {0.2, 0.3}) == doctest::Approx(perturbed_lowest(box, {-0.2, -0.3})).epsilon(1e-8));

  CHECK_THROWS_AS(perturbed_lowest(disk, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(perturbed_lowest(disk, {0.8, 0.7}), std::invalid_argument);
}

TEST_CASE("square with xi = (0.1, 0) separates into 1D problems") {
  const int n = 32;
  const double h = 1.0 / n;
  const double kappa = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
  const double oracle = weighted_1d_lowest(0.1, n) + kappa;
  CHECK(perturbed_lowest(kUnitSquare, {0.1, 0}, n) == doctest::Approx(oracle).epsilon(1e-8));

  // gamma at eps = 0.1 with h k z_alpha = (1, 0).
  TubeGeometry g;
  g.interval = Interval::bounded(1, 1);
  g.curvature = ScalarFunction::constant(1.0);
  g.profile = ScalarFunction::constant(1.0);
  const auto modes = solve_modes(kUnitSquare, n);
  const double lambda0 = weighted_1d_lowest(0.0, n) + kappa;
  CHECK(gamma(g, modes, 0.3, 0.1) == doctest::Approx((oracle - lambda0) / 0.01).epsilon(1e-5));
}

TEST_CASE("gamma") {
  TubeGeometry g;
  g.interval = Interval::bounded(1, 1);
  g.profile = ScalarFunction::parabola_cap(2.0);
  const auto modes = solve_modes(kUnitDisk, 64);
  CHECK(gamma(g, modes, 0.2, 0.1) == 0.0);

  g.curvature = ScalarFunction::constant(0.4);
  g.rotation = ScalarFunction::parse("0.3*s");
  const double s = 0.25;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05}) {
    const double diff = std::abs(gamma(g, modes, s, eps) - gamma(g, modes, s, eps / 2));
    CHECK(diff < prev);
    prev = diff;
  }
}

TEST_CASE("export writes metadata and a binary grid") {
  const auto modes = solve_modes(kUnitDisk, 20);
  const auto consts = constants(modes);
  const auto dir = std::filesystem::temp_directory_path() / "thintube_export_test";
  std::filesystem::create_directories(dir);
  const std::string stem = (dir / "disk").string();
  export_modes(modes, consts, stem);

  std::ifstream js(stem + ".json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["lambda0"].get<double>() == modes.lambda0);
  const int nx = j["grid"]["nx"], ny = j["grid"]["ny"];

  std::ifstream bin(stem + ".bin", std::ios::binary);
  std::vector<double> full(static_cast<std::size_t>(nx) * ny);
  bin.read(reinterpret_cast<char*>(full.data()), static_cast<std::streamsize>(full.size() * sizeof(double)));
  REQUIRE(bin.gcount() == static_cast<std::streamsize>(full.size() * sizeof(double)));
  double norm = 0.0;
  for (double v : full) norm += v * v * modes.grid.cell_area();
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
  std::filesystem::remove_all(dir);
}

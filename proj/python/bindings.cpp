#include "thintube/config.hpp"
#include "thintube/expression.hpp"
#include "thintube/harness.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace thintube;

namespace {

// Study entry points take the config document as JSON text; the Python
// package serializes dicts before calling in.
StudyConfig study(const std::string& config) { return parse_config(config).study; }

py::dict section_dict(const SectionModes& modes, const SectionConstants& c) {
  py::dict d;
  d["lambda0"] = modes.lambda0;
  d["lambda1"] = modes.lambda1;
  d["C1"] = c.c1;
  d["C2"] = c.c2;
  d["C3"] = c.c3;
  d["F"] = py::make_tuple(c.f[0], c.f[1]);
  d["rho_S"] = c.rho_s;
  d["unknowns"] = modes.grid.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Thin deformed tube eigenvalue studies";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<HypothesisError>(m, "HypothesisError", PyExc_ValueError);
  py::register_exception<ExpressionError>(m, "ExpressionError", PyExc_ValueError);

  m.def("evaluate", [](const std::string& text, double s) { return Expression::parse(text)(s); },
        py::arg("expression"), py::arg("s"), "Evaluate an expression in s.");

  m.def(
      "section",
      [](const std::string& config) {
        const auto cfg = study(config);
        const auto modes = solve_modes(cfg.section.build(), cfg.section.n);
        return section_dict(modes, constants(modes));
      },
      py::arg("config"), "Section eigenpair and constants for the config's section.");

  m.def(
      "validate_profile",
      [](const std::string& config) {
        const auto g = study(config).geometry.build();
        const auto r = validate_deformation(g.profile, g.interval);
        py::dict d;
        d["consistent"] = r.consistent;
        d["max_profile"] = r.max_value;
        d["quadratic_coefficient"] = r.quadratic_coefficient;
        d["failing_clause"] = r.failing_clause();
        d["limsup"] = r.limsup ? py::cast(*r.limsup) : py::none();
        return d;
      },
      py::arg("config"));

  m.def(
      "weo_spectrum",
      [](double lambda0, double max_profile, std::size_t j_max) {
        return weo_spectrum_exact(WEOSpec{lambda0, max_profile}, j_max);
      },
      py::arg("lambda0"), py::arg("max_profile"), py::arg("j_max"), "mu_j = (2j + 1) sqrt(2 lambda0 / M^3).");

  m.def(
      "weo_spectrum_numeric",
      [](double kappa, double half_width, std::size_t n, std::size_t j_max) {
        return weo_spectrum_numeric(kappa, half_width, n, j_max).values;
      },
      py::arg("kappa"), py::arg("half_width"), py::arg("n"), py::arg("j_max"));

  m.def(
      "effective_spectrum",
      [](const std::string& config, double eps, std::size_t count) {
        const auto cfg = study(config);
        const auto g = cfg.geometry.build();
        const auto modes = solve_modes(cfg.section.build(), cfg.section.n);
        const SectionData data{modes.lambda0, constants(modes)};
        const Window window = auto_window(g, data, eps, count ? count - 1 : 0, cfg.window);
        AssembleOptions opt;
        opt.bc = cfg.bc;
        opt.n = cfg.n;
        opt.delta = cfg.delta;
        py::gil_scoped_release release;
        const auto op = assemble_T(g, data, eps, window, opt);
        return std::make_pair(spectrum(op, count), op.potential.c);
      },
      py::arg("config"), py::arg("eps"), py::arg("count"),
      "Lowest eigenvalues of T_{eps,c} and the constant c.");

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def(
      "sweep", [](const std::string& config) { return report_json(sweep_theorem11(study(config))); },
      py::arg("config"), release, "Convergence report JSON.");
  m.def(
      "neumann", [](const std::string& config) { return report_json(neumann_variant(study(config))); },
      py::arg("config"), release);
  m.def(
      "essential", [](const std::string& config) { return essential_json(essential_spectrum_check(study(config))); },
      py::arg("config"), release);
  m.def(
      "tube3d",
      [](const std::string& config, const std::string& kind) {
        const auto cfg = study(config);
        cfg.validate();
        const auto g = cfg.geometry.build();
        const auto domain = cfg.section.build();
        if (kind != "form" && kind != "reduction") throw ConfigError("kind must be 'form' or 'reduction'");
        return tube3d_json(kind == "form" ? form_comparison_check(g, domain, cfg.eps, cfg.j_max, cfg.tube3d)
                                          : reduction_check(g, domain, cfg.eps, cfg.j_max, cfg.tube3d));
      },
      py::arg("config"), py::arg("kind"), release);
  m.def(
      "report_csv", [](const std::string& report) { return report_csv(report_from_json(report)); },
      py::arg("report_json"));
}

#include "thintube/cli.hpp"

#include "thintube/config.hpp"
#include "thintube/expression.hpp"
#include "thintube/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace thintube::cli {

namespace {

using nlohmann::json;

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// A numerical failure with the pipeline stage it happened in.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what) : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Runs f, tagging numerical exceptions with `stage`. Input errors pass through.
template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const HypothesisError&) {
    throw;
  } catch (const ExpressionError&) {
    throw;
  } catch (const DomainError&) {
    throw;
  } catch (const AdmissibilityError&) {
    throw;
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags shared by the study subcommands. Each is applied only when given, so
// flags win over the config document and the document over the defaults.
struct StudyFlags {
  std::string config;
  std::string curvature, torsion, rotation, profile;
  bool unbounded = false;
  std::vector<double> interval;
  std::string shape;
  double radius = 0.0;
  std::vector<double> center, x_range, y_range, vertices;
  int section_n = 0;
  std::vector<double> eps;
  std::size_t j_max = 0;
  std::size_t grid_n = 0;
  double delta = 0.0;
  double window_cap = 0.0;
  std::size_t planes = 0, coarse_planes = 0;
  int tube_section_n = 0, coarse_section_n = 0;
  double spread_limit = 0.0;
  std::string csv, json_out;

  std::vector<std::pair<CLI::Option*, std::function<void(StudyConfig&)>>> setters;

  template <class T>
  void bind(CLI::App* app, const std::string& name, T& target, const std::string& help,
            std::function<void(StudyConfig&)> apply) {
    setters.emplace_back(app->add_option(name, target, help), std::move(apply));
  }

  void add_geometry(CLI::App* app) {
    bind(app, "--curvature", curvature, "curvature k(s): expression in s or catalog name",
         [this](StudyConfig& c) { c.geometry.curvature = curvature; });
    bind(app, "--torsion", torsion, "torsion tau(s)", [this](StudyConfig& c) { c.geometry.torsion = torsion; });
    bind(app, "--rotation", rotation, "cross-section rotation alpha(s)",
         [this](StudyConfig& c) { c.geometry.rotation = rotation; });
    bind(app, "--profile", profile, "deformation profile h(s)",
         [this](StudyConfig& c) { c.geometry.profile = profile; });
    setters.emplace_back(app->add_flag("--unbounded", unbounded, "take I to be the real line"),
                         [this](StudyConfig& c) { c.geometry.unbounded = unbounded; });
    setters.emplace_back(app->add_option("--interval", interval, "bounded I = (-a, b), given as a b")->expected(2),
                         [this](StudyConfig& c) {
                           c.geometry.a = interval[0];
                           c.geometry.b = interval[1];
                         });
  }

  void add_section(CLI::App* app, const std::string& n_names) {
    bind(app, "--shape", shape, "section shape: disk, rectangle or polygon",
         [this](StudyConfig& c) { c.section.shape = shape; });
    bind(app, "--radius", radius, "disk radius", [this](StudyConfig& c) { c.section.radius = radius; });
    setters.emplace_back(app->add_option("--center", center, "disk center x y")->expected(2),
                         [this](StudyConfig& c) { c.section.center = {center[0], center[1]}; });
    setters.emplace_back(app->add_option("--x-range", x_range, "rectangle x range lo hi")->expected(2),
                         [this](StudyConfig& c) { c.section.x_range = {x_range[0], x_range[1]}; });
    setters.emplace_back(app->add_option("--y-range", y_range, "rectangle y range lo hi")->expected(2),
                         [this](StudyConfig& c) { c.section.y_range = {y_range[0], y_range[1]}; });
    setters.emplace_back(app->add_option("--vertices", vertices, "polygon vertices x1 y1 x2 y2 ...")->expected(6, -1),
                         [this](StudyConfig& c) {
                           if (vertices.size() % 2) throw ConfigError("--vertices needs an even count of numbers");
                           c.section.vertices.clear();
                           for (std::size_t i = 0; i < vertices.size(); i += 2)
                             c.section.vertices.push_back({vertices[i], vertices[i + 1]});
                         });
    bind(app, n_names, section_n, "section grid intervals across the longer side of the bounding box",
         [this](StudyConfig& c) { c.section.n = section_n; });
  }

  void add_study(CLI::App* app) {
    setters.emplace_back(app->add_option("--eps", eps, "decreasing eps list"),
                         [this](StudyConfig& c) { c.eps = eps; });
    bind(app, "--j-max", j_max, "highest eigenvalue index", [this](StudyConfig& c) { c.j_max = j_max; });
    bind(app, "--grid-n", grid_n, "1D interior nodes (0 = automatic)", [this](StudyConfig& c) { c.n = grid_n; });
    bind(app, "--delta", delta, "admissibility margin delta in (0, 1)", [this](StudyConfig& c) { c.delta = delta; });
    bind(app, "--window-cap", window_cap, "largest half-width tried by the automatic window",
         [this](StudyConfig& c) { c.window.cap = window_cap; });
  }

  void add_tube3d(CLI::App* app) {
    bind(app, "--planes", planes, "interior s-planes of the default 3D grid",
         [this](StudyConfig& c) { c.tube3d.n_s = planes; });
    bind(app, "--tube-section-n", tube_section_n, "section resolution of the default 3D grid",
         [this](StudyConfig& c) { c.tube3d.section_n = tube_section_n; });
    bind(app, "--coarse-planes", coarse_planes, "s-planes of the coarse control grid",
         [this](StudyConfig& c) { c.tube3d.coarse_n_s = coarse_planes; });
    bind(app, "--coarse-section-n", coarse_section_n, "section resolution of the coarse control grid",
         [this](StudyConfig& c) { c.tube3d.coarse_section_n = coarse_section_n; });
    bind(app, "--spread-limit", spread_limit, "largest accepted coarse/default relative spread",
         [this](StudyConfig& c) { c.tube3d.spread_limit = spread_limit; });
  }

  void add_outputs(CLI::App* app, bool with_csv) {
    if (with_csv)
      bind(app, "--csv", csv, "CSV output path", [this](StudyConfig& c) { c.csv_path = csv; });
    bind(app, "--json", json_out, "JSON output path", [this](StudyConfig& c) { c.json_path = json_out; });
  }

  StudyConfig resolve(const std::string& command) const {
    StudyConfig cfg;
    if (!config.empty()) {
      const auto doc = load_config(config);
      if (doc.command && *doc.command != command)
        throw ConfigError(config + ": document is for '" + *doc.command + "', not '" + command + "'");
      cfg = doc.study;
    }
    for (const auto& [opt, apply] : setters)
      if (opt->count() > 0) apply(cfg);
    return cfg;
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

double mu_j(std::size_t j, double lambda0, double m) {
  return (2.0 * static_cast<double>(j) + 1.0) * std::sqrt(2.0 * lambda0 / (m * m * m));
}

int cmd_section(const StudyConfig& cfg, const std::string& out_stem, Context& ctx) {
  const auto domain = cfg.section.build();
  const auto modes = in_stage("section", [&] { return solve_modes(domain, cfg.section.n); });
  const auto c = constants(modes);
  ctx.out << "section " << domain.describe() << ", n = " << cfg.section.n << "\n"
          << "lambda0 " << fmt12(modes.lambda0) << "\n"
          << "lambda1 " << fmt12(modes.lambda1) << "\n"
          << "C1 " << fmt12(c.c1) << "\n"
          << "C2 " << fmt12(c.c2) << "\n"
          << "C3 " << fmt12(c.c3) << "\n"
          << "F " << fmt12(c.f[0]) << " " << fmt12(c.f[1]) << "\n"
          << "rho_S " << fmt12(c.rho_s) << "\n";
  if (!out_stem.empty()) {
    try {
      export_modes(modes, c, out_stem);
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    ctx.out << "wrote " << out_stem << ".json, " << out_stem << ".bin\n";
  }
  return kExitOk;
}

int cmd_geometry(const StudyConfig& cfg, Context& ctx) {
  const auto g = cfg.geometry.build();
  const auto report = validate_deformation(g.profile, g.interval);
  const double eps_max = epsilon_max(g, cfg.delta, cfg.section.build().rho());
  ctx.out << "M " << fmt12(report.max_value) << "\n"
          << "(M - h)/s^2 at 0 " << fmt12(report.quadratic_coefficient) << "\n"
          << "sup |h'/h| " << fmt12(report.sup_log_slope) << "\n";
  if (report.limsup) ctx.out << "limsup h " << fmt12(*report.limsup) << "\n";
  ctx.out << "epsilon_max(delta = " << fmt12(cfg.delta) << ") " << fmt12(eps_max) << "\n";
  json clauses = json::array();
  for (const auto& c : report.clauses) {
    ctx.out << (c.passed ? "  ok    " : "  FAIL  ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    clauses.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  ctx.out << (report.consistent ? "hypotheses consistent on the sampling grid\n"
                                : "hypotheses violated: " + report.failing_clause() + "\n");
  if (!cfg.json_path.empty()) {
    json j{{"max_profile", report.max_value},
           {"quadratic_coefficient", report.quadratic_coefficient},
           {"sup_log_slope", report.sup_log_slope},
           {"limsup", report.limsup ? json(*report.limsup) : json(nullptr)},
           {"epsilon_max", eps_max},
           {"delta", cfg.delta},
           {"consistent", report.consistent},
           {"clauses", clauses}};
    write_file(cfg.json_path, j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_effective(const StudyConfig& cfg, Context& ctx) {
  cfg.validate();
  const auto g = cfg.geometry.build();
  const auto modes = in_stage("section", [&] { return solve_modes(cfg.section.build(), cfg.section.n); });
  const SectionData data{modes.lambda0, constants(modes)};
  const double m = g.max_profile();
  std::string csv = "epsilon,s,theta,zeta,W\n";
  json potentials = json::array();
  ctx.out << "lambda0 " << fmt12(data.lambda0) << ", M " << fmt12(m) << "\n";
  for (double eps : cfg.eps) {
    const Window window = in_stage("window", [&] { return auto_window(g, data, eps, cfg.j_max, cfg.window); });
    AssembleOptions opt;
    opt.bc = cfg.bc;
    opt.n = cfg.n;
    opt.delta = cfg.delta;
    const auto op = in_stage("assemble", [&] { return assemble_T(g, data, eps, window, opt); });
    const auto values = in_stage("solve", [&] { return spectrum(op, cfg.j_max + 1); });
    ctx.out << "eps " << fmt12(eps) << "  window [" << fmt12(window.left) << ", " << fmt12(window.right)
            << "]  c " << fmt12(op.potential.c) << "  nodes " << op.potential.s.size() << "\n";
    for (std::size_t j = 0; j < values.size(); ++j)
      ctx.out << "  l_" << j << " " << fmt12(values[j]) << "  eps (l - c) " << fmt12(eps * (values[j] - op.potential.c))
              << "  mu_" << j << " " << fmt12(mu_j(j, data.lambda0, m)) << "\n";
    std::istringstream lines(potential_csv(op.potential));
    std::string line;
    std::getline(lines, line);  // per-eps header
    while (std::getline(lines, line)) csv += fmt12(eps) + "," + line + "\n";
    potentials.push_back(json::parse(potential_json(op.potential, values)));
  }
  if (!cfg.csv_path.empty()) write_file(cfg.csv_path, csv);
  if (!cfg.json_path.empty()) write_file(cfg.json_path, potentials.dump(2) + "\n");
  return kExitOk;
}

void print_convergence(const ConvergenceReport& r, Context& ctx) {
  ctx.out << r.study << " (" << r.boundary << "), lambda0 " << fmt12(r.lambda0) << ", M " << fmt12(r.max_profile)
          << "\n";
  ctx.out << "epsilon j scaled_eigenvalue mu_j abs_error\n";
  for (const auto& row : r.rows)
    ctx.out << fmt12(row.eps) << " " << row.j << " " << fmt12(row.scaled) << " " << fmt12(row.mu) << " "
            << fmt12(row.abs_error) << "\n";
  for (const auto& l : r.limits)
    ctx.out << "limit j=" << l.j << " " << fmt12(l.limit) << " vs mu_j " << fmt12(l.mu) << " (relative deviation "
            << fmt12(l.deviation) << ", order " << fmt12(l.order) << (l.order_fitted ? " fitted" : " assumed")
            << ")\n";
  for (const auto& note : r.notes) ctx.out << "note: " << note << "\n";
  for (const auto& f : r.failures)
    ctx.err << "failed: eps " << fmt12(f.eps) << " in stage '" << f.stage << "': " << f.reason << "\n";
}

void write_report(const ConvergenceReport& r, const StudyConfig& cfg) {
  if (!cfg.csv_path.empty()) write_file(cfg.csv_path, report_csv(r));
  if (!cfg.json_path.empty()) write_file(cfg.json_path, report_json(r));
}

int cmd_sweep(const StudyConfig& cfg, bool neumann, Context& ctx) {
  const auto report = neumann ? neumann_variant(cfg) : sweep_theorem11(cfg);
  print_convergence(report, ctx);
  write_report(report, cfg);
  if (!report.complete()) {
    ctx.err << "numerical failure in stage '" << report.failures.front().stage << "' ("
            << report.failures.size() << " of " << cfg.eps.size() << " eps rows failed)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_tube3d(const StudyConfig& cfg, const std::string& kind, Context& ctx) {
  cfg.validate();
  const auto g = cfg.geometry.build();
  const auto domain = cfg.section.build();
  const auto report = in_stage("tube3d", [&] {
    return kind == "form" ? form_comparison_check(g, domain, cfg.eps, cfg.j_max, cfg.tube3d)
                          : reduction_check(g, domain, cfg.eps, cfg.j_max, cfg.tube3d);
  });
  ctx.out << report.kind << "\n";
  ctx.out << "epsilon j l_hat l_other difference coarse_difference spread\n";
  for (const auto& r : report.rows)
    ctx.out << fmt12(r.eps) << " " << r.j << " " << fmt12(r.l_hat) << " " << fmt12(r.l_other) << " "
            << fmt12(r.difference) << " " << fmt12(r.coarse_difference) << " " << fmt12(r.spread) << "\n";
  for (std::size_t j = 0; j < report.fits.size(); ++j)
    if (report.fits[j]) ctx.out << "slope j=" << j << " " << fmt12(report.fits[j]->slope) << "\n";
  if (report.all_zero) ctx.out << "all differences vanish\n";
  for (const auto& note : report.notes) ctx.out << "note: " << note << "\n";
  if (!cfg.json_path.empty()) write_file(cfg.json_path, tube3d_json(report));
  return kExitOk;
}

int cmd_essential(const StudyConfig& cfg, Context& ctx) {
  const auto report = essential_spectrum_check(cfg);
  ctx.out << "lambda0 " << fmt12(report.lambda0) << ", M " << fmt12(report.max_profile) << ", N "
          << fmt12(report.limsup) << "\n";
  ctx.out << "epsilon l0 threshold below certified doubled_shift\n";
  bool failed = false;
  for (const auto& r : report.rows) {
    ctx.out << fmt12(r.eps) << " " << fmt12(r.l0) << " " << fmt12(r.threshold) << " " << r.below << " "
            << (r.certified ? "yes" : "no") << " " << fmt12(r.doubled_shift) << "\n";
    if (!r.solved) {
      ctx.err << "numerical failure in stage 'essential' at eps " << fmt12(r.eps) << ": " << r.reason << "\n";
      failed = true;
    }
  }
  for (const auto& note : report.notes) ctx.out << "note: " << note << "\n";
  if (!cfg.json_path.empty()) write_file(cfg.json_path, essential_json(report));
  return failed ? kExitNumerical : kExitOk;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out_path, Context& ctx) {
  ConvergenceReport report;
  try {
    report = report_from_json(read_file(in));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(in + ": not a convergence report (" + e.what() + ")");
  }
  const std::string text = format == "csv" ? report_csv(report) : report_json(report);
  if (out_path.empty())
    ctx.out << text;
  else
    write_file(out_path, text);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thin deformed tube eigenvalue studies"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  Context ctx{out, err};

  struct Sub {
    CLI::App* app;
    StudyFlags flags;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  const auto make = [&](const std::string& name, const std::string& help) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->app->add_option("--config", s->flags.config, "JSON study document")->check(CLI::ExistingFile);
    subs.push_back(std::move(s));
    return subs.back().get();
  };

  std::string section_out;
  auto* section = make("section", "cross-section eigenpair and constants");
  section->flags.add_section(section->app, "--n,--section-n");
  section->app->add_option("--out", section_out, "output stem for <stem>.json and <stem>.bin");

  auto* geometry = make("geometry", "validate the deformation profile and report epsilon_max");
  geometry->flags.add_geometry(geometry->app);
  geometry->flags.add_section(geometry->app, "--section-n");
  geometry->flags.bind(geometry->app, "--delta", geometry->flags.delta, "admissibility margin delta in (0, 1)",
                       [f = &geometry->flags](StudyConfig& c) { c.delta = f->delta; });
  geometry->flags.add_outputs(geometry->app, false);

  auto* effective = make("effective", "effective potential and spectrum of the 1D operator");
  std::string effective_bc;
  for (auto* s : {effective, make("sweep", "eps sweep of the scaled eigenvalues against the oscillator"),
                  make("neumann", "the sweep with Neumann ends"), make("essential", "essential-spectrum threshold check"),
                  make("tube3d", "3D form comparison or reduction witness")}) {
    s->flags.add_geometry(s->app);
    s->flags.add_section(s->app, "--section-n");
    s->flags.add_study(s->app);
    s->flags.add_outputs(s->app, s->app->get_name() != "essential" && s->app->get_name() != "tube3d");
  }
  effective->app->add_option("--boundary", effective_bc, "dirichlet or neumann")
      ->check(CLI::IsMember({"dirichlet", "neumann"}));
  std::string tube_kind = "reduction";
  auto* tube = subs.back().get();
  tube->flags.add_tube3d(tube->app);
  tube->app->add_option("--kind", tube_kind, "form (Ghat against G) or reduction (Ghat against T)")
      ->check(CLI::IsMember({"form", "reduction"}));

  std::string report_in, report_format = "csv", report_out;
  auto* report = app.add_subcommand("report", "re-emit a saved convergence report");
  report->add_option("--in", report_in, "convergence report JSON")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", report_out, "output path (default: standard output)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto* target = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    if (name == "report") return cmd_report(report_in, report_format, report_out, ctx);
    Sub* sub = nullptr;
    for (auto& s : subs)
      if (s->app == chosen) sub = s.get();
    StudyConfig cfg = sub->flags.resolve(name);
    if (name == "section") return cmd_section(cfg, section_out, ctx);
    if (name == "geometry") return cmd_geometry(cfg, ctx);
    if (name == "effective") {
      if (!effective_bc.empty()) cfg.bc = effective_bc == "neumann" ? BoundaryCondition::Neumann : BoundaryCondition::Dirichlet;
      return cmd_effective(cfg, ctx);
    }
    if (name == "sweep") return cmd_sweep(cfg, false, ctx);
    if (name == "neumann") return cmd_sweep(cfg, true, ctx);
    if (name == "essential") return cmd_essential(cfg, ctx);
    return cmd_tube3d(cfg, tube_kind, ctx);
  } catch (const StageError& e) {
    err << "numerical failure in stage '" << e.stage() << "': " << e.what() << "\n";
    return kExitNumerical;
  } catch (const HypothesisError& e) {
    err << "out of hypothesis: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ExpressionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AdmissibilityError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure in stage '" << name << "': " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace thintube::cli

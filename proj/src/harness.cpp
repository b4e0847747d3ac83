#include "thintube/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace thintube {

using nlohmann::json;

TubeGeometry GeometrySpec::build() const {
  TubeGeometry g;
  g.interval = unbounded ? Interval::real_line() : Interval::bounded(a, b);
  g.curvature = ScalarFunction::parse(curvature);
  g.torsion = ScalarFunction::parse(torsion);
  g.rotation = ScalarFunction::parse(rotation);
  g.profile = ScalarFunction::parse(profile);
  return g;
}

CrossSectionDomain SectionSpec::build() const {
  if (shape == "disk") return CrossSectionDomain::disk(radius, center);
  if (shape == "rectangle") return CrossSectionDomain::rectangle(x_range, y_range);
  if (shape == "polygon") return CrossSectionDomain::polygon(vertices);
  throw ConfigError("unknown section shape '" + shape + "' (expected disk, rectangle or polygon)");
}

void StudyConfig::validate() const {
  if (eps.empty()) throw ConfigError("eps list is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0)) throw ConfigError("eps values must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("eps list must be strictly decreasing");
  }
  if (section.n < 16) throw ConfigError("section resolution must be at least 16");
  if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  if (n != 0 && n < 64) throw ConfigError("1D node count must be 0 (automatic) or at least 64");
  TubeGeometry g;
  CrossSectionDomain domain = CrossSectionDomain::disk(1.0);
  try {
    g = geometry.build();
    domain = section.build();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const double limit = epsilon_max(g, delta, domain.rho());
  if (!(eps.front() < limit)) {
    std::ostringstream msg;
    msg << "eps = " << eps.front() << " is not below epsilon_max = " << limit << " for delta = " << delta;
    throw ConfigError(msg.str());
  }
}

unsigned worker_count() {
  if (const char* env = std::getenv("THINTUBE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Runs task(i) for i in [0, count) on up to worker_count() threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  for (auto& t : pool) t.join();
}

struct EpsOutcome {
  std::vector<double> scaled;
  double c = 0.0;
  std::size_t grid_n = 0;
  double window_L = 0.0;
  std::optional<RowFailure> failure;
};

EpsOutcome solve_eps(const TubeGeometry& g, const SectionData& data, const StudyConfig& cfg, BoundaryCondition bc,
                     double eps) {
  EpsOutcome out;
  std::string stage = "window";
  try {
    const Window window = auto_window(g, data, eps, cfg.j_max, cfg.window);
    out.window_L = std::max(-window.left, window.right);
    stage = "assemble";
    AssembleOptions opt;
    opt.bc = bc;
    opt.n = cfg.n;
    opt.delta = cfg.delta;
    const auto op = assemble_T(g, data, eps, window, opt);
    out.c = op.potential.c;
    out.grid_n = op.matrix.size();
    stage = "solve";
    out.scaled = scaled_spectrum(op, cfg.j_max);
  } catch (const std::exception& e) {
    out.failure = RowFailure{eps, stage, e.what()};
  }
  return out;
}

void extrapolate(ConvergenceReport& report, const std::vector<double>& eps_done, std::size_t j_max,
                 const std::vector<double>& mu) {
  report.limits.clear();
  report.fits.clear();
  for (std::size_t j = 0; j <= j_max; ++j) {
    std::vector<double> values;
    std::vector<std::pair<double, double>> errs;
    for (const auto& r : report.rows)
      if (r.j == j) {
        values.push_back(r.scaled);
        if (r.abs_error > 0 && !r.below_tolerance) errs.emplace_back(r.eps, r.abs_error);
      }
    report.fits.push_back(errs.size() >= 3 && errs.size() == values.size()
                              ? std::optional<numerics::RateFit>(numerics::fit_rate(errs))
                              : std::nullopt);
    if (values.size() < 3) continue;
    const std::size_t k = values.size();
    const double r1 = eps_done[k - 3] / eps_done[k - 2], r2 = eps_done[k - 2] / eps_done[k - 1];
    LimitEstimate est;
    est.j = j;
    est.mu = mu[j];
    if (std::abs(r1 - r2) > 1e-9 * r2) {
      est.limit = values[k - 1];
      report.notes.push_back("eps list is not geometric at the tail; limit for j = " + std::to_string(j) +
                             " is the last value");
    } else {
      const auto order = numerics::empirical_order(values[k - 3], values[k - 2], values[k - 1], r2);
      est.order_fitted = order.has_value();
      est.order = order.value_or(1.0);
      if (!order)
        report.notes.push_back("differences for j = " + std::to_string(j) +
                               " do not shrink geometrically; extrapolated with order 1");
      est.limit = numerics::richardson(values[k - 2], values[k - 1], r2, est.order);
    }
    est.deviation = std::abs(est.limit - est.mu) / est.mu;
    report.limits.push_back(est);
  }
}

ConvergenceReport run_sweep(const TubeGeometry& g, const StudyConfig& cfg, BoundaryCondition bc, bool allow_outside,
                            const char* name) {
  cfg.validate();
  ConvergenceReport report;
  report.study = name;
  report.boundary = to_string(bc);
  report.section_n = cfg.section.n;
  report.delta = cfg.delta;

  const auto check = validate_deformation(g.profile, g.interval);
  if (!check.consistent) {
    const std::string msg = "profile outside the hypotheses (" + check.failing_clause() +
                            "); the harmonic-oscillator limit does not apply";
    if (!allow_outside) throw HypothesisError(msg);
    report.out_of_hypothesis = true;
    report.notes.push_back(msg);
  }

  const auto modes = solve_modes(cfg.section.build(), cfg.section.n);
  const SectionData data{modes.lambda0, constants(modes)};
  const WEOSpec weo{modes.lambda0, g.max_profile()};
  const auto mu = weo_spectrum_exact(weo, cfg.j_max);
  report.lambda0 = modes.lambda0;
  report.max_profile = g.max_profile();
  report.kappa = weo.kappa();

  std::vector<EpsOutcome> outcomes(cfg.eps.size());
  parallel_for(cfg.eps.size(), [&](std::size_t i) { outcomes[i] = solve_eps(g, data, cfg, bc, cfg.eps[i]); });

  std::vector<double> eps_done;
  for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.failure) {
      report.failures.push_back(*o.failure);
      continue;
    }
    eps_done.push_back(cfg.eps[i]);
    for (std::size_t j = 0; j <= cfg.j_max; ++j) {
      ReportRow row;
      row.eps = cfg.eps[i];
      row.j = j;
      row.scaled = o.scaled[j];
      row.mu = mu[j];
      row.abs_error = std::abs(o.scaled[j] - mu[j]);
      row.grid_n = o.grid_n;
      row.window_L = o.window_L;
      row.c = o.c;
      row.below_tolerance = row.abs_error <= 1e-12 * std::max(1.0, std::abs(mu[j]));
      report.rows.push_back(row);
    }
  }
  extrapolate(report, eps_done, cfg.j_max, mu);
  return report;
}

}  // namespace

ConvergenceReport sweep_theorem11(const StudyConfig& cfg) {
  return run_sweep(cfg.geometry.build(), cfg, cfg.bc, false, "sweep");
}

ConvergenceReport neumann_variant(const StudyConfig& cfg) {
  return run_sweep(cfg.geometry.build(), cfg, BoundaryCondition::Neumann, true, "neumann");
}

double limit_spread(const ConvergenceReport& a, const ConvergenceReport& b, std::size_t j_max) {
  double worst = 0.0;
  for (std::size_t j = 0; j <= j_max; ++j) {
    if (j >= a.limits.size() || j >= b.limits.size())
      throw std::invalid_argument("limit_spread: a report lacks the limit for j = " + std::to_string(j));
    const double x = a.limits[j].limit, y = b.limits[j].limit;
    worst = std::max(worst, std::abs(x - y) / std::max(std::abs(x), std::abs(y)));
  }
  return worst;
}

bool errors_monotone(const ConvergenceReport& report, std::size_t j) {
  std::vector<double> errs;
  for (const auto& r : report.rows)
    if (r.j == j) errs.push_back(r.abs_error);
  if (errs.size() < 3) return false;
  const std::size_t k = errs.size();
  return errs[k - 2] <= errs[k - 3] && errs[k - 1] <= errs[k - 2];
}

EssentialReport essential_spectrum_check(const StudyConfig& cfg) {
  cfg.validate();
  const auto g = cfg.geometry.build();
  if (!g.interval.unbounded) throw ConfigError("essential_spectrum_check needs the interval to be the real line");
  EssentialReport report;
  const auto check = validate_deformation(g.profile, g.interval);
  report.max_profile = g.max_profile();
  report.limsup = check.limsup.value_or(g.max_profile());
  if (!check.consistent) {
    report.out_of_hypothesis = true;
    report.notes.push_back("profile outside the hypotheses (" + check.failing_clause() +
                           "); no bound state is expected");
  }
  const auto modes = solve_modes(cfg.section.build(), cfg.section.n);
  const SectionData data{modes.lambda0, constants(modes)};
  report.lambda0 = modes.lambda0;
  const double m = report.max_profile, n_sup = report.limsup;

  report.rows.resize(cfg.eps.size());
  parallel_for(cfg.eps.size(), [&](std::size_t i) {
    EssentialRow& row = report.rows[i];
    const double eps = cfg.eps[i];
    row.eps = eps;
    row.threshold = data.lambda0 / (eps * eps) * (1.0 / (n_sup * n_sup) - 1.0 / (m * m));
    try {
      Window window{-10.0, 10.0};
      try {
        // A j = 0 window is tight enough that doubling it still moves l_0 by ~1e-4.
        window = auto_window(g, data, eps, std::max<std::size_t>(cfg.j_max, 2), cfg.window);
      } catch (const WindowError&) {
        row.reason = "no confining window; fixed window L = 10";
      }
      row.window_L = window.right;
      AssembleOptions opt;
      opt.delta = cfg.delta;
      opt.n = cfg.n ? cfg.n : default_nodes(window, eps);
      if (opt.n % 2 == 0) ++opt.n;  // odd, so the doubled grid 2n + 1 keeps every node
      const auto op = assemble_T(g, data, eps, window, opt);
      row.l0 = spectrum(op, 1)[0];
      row.below = numerics::sturm_count(op.matrix, row.threshold);
      AssembleOptions wide = opt;
      wide.n = 2 * opt.n + 1;
      wide.c = op.potential.c;
      const auto op2 = assemble_T(g, data, eps, Window{2 * window.left, 2 * window.right}, wide);
      const double l0_wide = spectrum(op2, 1)[0];
      row.doubled_shift = std::abs(l0_wide - row.l0) / std::abs(row.l0);
      row.stable = row.doubled_shift < 1e-6;
      row.solved = true;
      row.certified = row.l0 < row.threshold && row.stable;
      if (!row.certified && row.reason.empty()) row.reason = "no discrete eigenvalue certified at this eps";
    } catch (const std::exception& e) {
      row.reason = e.what();
    }
  });
  return report;
}

DecaySensitivity decay_sensitivity(const StudyConfig& cfg, const std::vector<double>& factors) {
  DecaySensitivity out;
  out.factors = factors;
  const auto base = cfg.geometry.build();
  const ScalarFunction k = base.curvature;
  for (double f : factors) {
    if (!(f > 0)) throw std::invalid_argument("decay_sensitivity: stretch factors must be positive");
    TubeGeometry g = base;
    g.curvature = ScalarFunction([k, f](double s) { return k(s / f); },
                                 [k, f](double s) { return k.derivative(s / f) / f; },
                                 k.description() + " stretched by " + fmt12(f));
    const auto report = run_sweep(g, cfg, cfg.bc, false, "decay_sensitivity");
    std::vector<double> limits;
    for (const auto& l : report.limits) limits.push_back(l.limit);
    if (!out.limits.empty())
      for (std::size_t j = 0; j < limits.size() && j < out.limits.front().size(); ++j)
        out.max_relative_change = std::max(out.max_relative_change,
                                           std::abs(limits[j] - out.limits.front()[j]) / std::abs(out.limits.front()[j]));
    out.limits.push_back(std::move(limits));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json fit_json(const std::optional<numerics::RateFit>& f) {
  if (!f) return nullptr;
  return {{"slope", f->slope}, {"intercept", f->intercept}, {"r_squared", f->r_squared}};
}

std::optional<numerics::RateFit> fit_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return numerics::RateFit{j.at("slope").get<double>(), j.at("intercept").get<double>(),
                           j.at("r_squared").get<double>()};
}

}  // namespace

std::string report_csv(const ConvergenceReport& report) {
  std::ostringstream out;
  out << "epsilon,j,scaled_eigenvalue,mu_j,abs_error,grid_n,window_L\n";
  for (const auto& r : report.rows)
    out << fmt12(r.eps) << ',' << r.j << ',' << fmt12(r.scaled) << ',' << fmt12(r.mu) << ',' << fmt12(r.abs_error)
        << ',' << r.grid_n << ',' << fmt12(r.window_L) << '\n';
  return out.str();
}

std::string report_json(const ConvergenceReport& report) {
  json j;
  j["study"] = report.study;
  j["boundary"] = report.boundary;
  j["lambda0"] = report.lambda0;
  j["max_profile"] = report.max_profile;
  j["kappa"] = report.kappa;
  j["section_n"] = report.section_n;
  j["delta"] = report.delta;
  j["out_of_hypothesis"] = report.out_of_hypothesis;
  j["rows"] = json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"epsilon", r.eps},
                         {"j", r.j},
                         {"scaled_eigenvalue", r.scaled},
                         {"mu_j", r.mu},
                         {"abs_error", r.abs_error},
                         {"grid_n", r.grid_n},
                         {"window_L", r.window_L},
                         {"c", r.c},
                         {"below_tolerance", r.below_tolerance}});
  j["failures"] = json::array();
  for (const auto& f : report.failures)
    j["failures"].push_back({{"epsilon", f.eps}, {"stage", f.stage}, {"reason", f.reason}});
  j["limits"] = json::array();
  for (const auto& l : report.limits)
    j["limits"].push_back({{"j", l.j},
                           {"limit", l.limit},
                           {"mu_j", l.mu},
                           {"deviation", l.deviation},
                           {"order", l.order},
                           {"order_fitted", l.order_fitted}});
  j["fits"] = json::array();
  for (const auto& f : report.fits) j["fits"].push_back(fit_json(f));
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

ConvergenceReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  ConvergenceReport r;
  r.study = j.at("study").get<std::string>();
  r.boundary = j.at("boundary").get<std::string>();
  r.lambda0 = j.at("lambda0").get<double>();
  r.max_profile = j.at("max_profile").get<double>();
  r.kappa = j.at("kappa").get<double>();
  r.section_n = j.at("section_n").get<int>();
  r.delta = j.at("delta").get<double>();
  r.out_of_hypothesis = j.at("out_of_hypothesis").get<bool>();
  for (const auto& x : j.at("rows"))
    r.rows.push_back({x.at("epsilon").get<double>(), x.at("j").get<std::size_t>(),
                      x.at("scaled_eigenvalue").get<double>(), x.at("mu_j").get<double>(),
                      x.at("abs_error").get<double>(), x.at("grid_n").get<std::size_t>(),
                      x.at("window_L").get<double>(), x.at("c").get<double>(), x.at("below_tolerance").get<bool>()});
  for (const auto& x : j.at("failures"))
    r.failures.push_back({x.at("epsilon").get<double>(), x.at("stage").get<std::string>(),
                          x.at("reason").get<std::string>()});
  for (const auto& x : j.at("limits"))
    r.limits.push_back({x.at("j").get<std::size_t>(), x.at("limit").get<double>(), x.at("mu_j").get<double>(),
                        x.at("deviation").get<double>(), x.at("order").get<double>(),
                        x.at("order_fitted").get<bool>()});
  for (const auto& x : j.at("fits")) r.fits.push_back(fit_from(x));
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

void emit_report(const ConvergenceReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << (format == ReportFormat::Csv ? report_csv(report) : report_json(report));
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string essential_json(const EssentialReport& report) {
  json j;
  j["lambda0"] = report.lambda0;
  j["max_profile"] = report.max_profile;
  j["limsup"] = report.limsup;
  j["out_of_hypothesis"] = report.out_of_hypothesis;
  j["rows"] = json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"epsilon", r.eps},
                         {"l0", r.l0},
                         {"threshold", r.threshold},
                         {"certified", r.certified},
                         {"below_threshold", r.below},
                         {"window_L", r.window_L},
                         {"doubled_shift", r.doubled_shift},
                         {"stable", r.stable},
                         {"solved", r.solved},
                         {"reason", r.reason}});
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

std::string tube3d_json(const Tube3DReport& report) {
  json j;
  j["kind"] = report.kind;
  j["grid_limited"] = report.grid_limited;
  j["all_zero"] = report.all_zero;
  j["rows"] = json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"epsilon", r.eps},
                         {"j", r.j},
                         {"l_hat", r.l_hat},
                         {"l_other", r.l_other},
                         {"difference", r.difference},
                         {"coarse_difference", r.coarse_difference},
                         {"spread", r.spread},
                         {"d", r.d}});
  j["fits"] = json::array();
  for (const auto& f : report.fits) j["fits"].push_back(fit_json(f));
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

}  // namespace thintube

#include "capcm/cli.hpp"

#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"
#include "capcm/support_geometry.hpp"
#include "capcm/validation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace capcm {

namespace fs = std::filesystem;

DomainPtr RunConfig::domain() const { return CapDomain::build(n, theta, grid_mode, nr, nphi); }

// ---------------------------------------------------------------------------------------------
// config

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "problem.n", "problem.k", "problem.theta", "problem.mode", "problem.symmetry", "problem.phi",
      "problem.phi_value", "problem.phi_file", "problem.family", "problem.eps", "problem.scale", "problem.shift_x",
      "problem.shift_y", "problem.s", "problem.s_file", "problem.exact_forward",
      "grid.mode", "grid.nr", "grid.nphi",
      "solver.newton_tol", "solver.path_tol", "solver.max_newton_iters", "solver.backtrack", "solver.min_step", "solver.dt_initial",
      "solver.dt_floor", "solver.convexity_floor", "solver.boundary_tol", "solver.integral_tol",
      "solver.hypothesis_tol", "solver.psi_power", "solver.translation_tol",
      "output.dir", "output.obj", "output.seed",
      "validate.af_trials", "validate.inject"};
  return keys;
}

}  // namespace

double parse_angle(const std::string& text) {
  std::string t;
  for (char c : text)
    if (c != ' ') t += c;
  const auto pi_at = t.find("pi");
  if (pi_at == std::string::npos) return to_double("angle", t);
  double factor = 1.0, divisor = 1.0;
  const std::string before = t.substr(0, pi_at), after = t.substr(pi_at + 2);
  if (!before.empty()) {
    if (before.back() != '*') throw ConfigError("angle: cannot parse '" + text + "'");
    factor = to_double("angle", before.substr(0, before.size() - 1));
  }
  if (!after.empty()) {
    if (after.front() != '/') throw ConfigError("angle: cannot parse '" + text + "'");
    divisor = to_double("angle", after.substr(1));
    if (divisor == 0.0) throw ConfigError("angle: division by zero");
  }
  return factor * M_PI / divisor;
}

RunConfig make_run_config(const ConfigMap& map, const CliOverrides& overrides) {
  for (const auto& [key, value] : map)
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  };
  auto wrap = [](auto fn) {
    try {
      return fn();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  };
  if (auto v = get("problem.n")) c.n = to_int("problem.n", *v);
  if (auto v = get("problem.k")) c.k = to_int("problem.k", *v);
  if (auto v = get("problem.theta")) c.theta = parse_angle(*v);
  if (auto v = get("problem.mode")) c.mode = wrap([&] { return homotopy_mode_from_string(*v); });
  if (auto v = get("problem.symmetry")) c.symmetry = wrap([&] { return symmetry_from_string(*v); });
  if (auto v = get("problem.phi")) c.phi = *v;
  if (auto v = get("problem.phi_value")) c.phi_value = to_double("problem.phi_value", *v);
  if (auto v = get("problem.phi_file")) c.phi_file = *v;
  if (auto v = get("problem.family")) c.family = *v;
  if (auto v = get("problem.eps")) c.eps = to_double("problem.eps", *v);
  if (auto v = get("problem.scale")) c.scale = to_double("problem.scale", *v);
  if (auto v = get("problem.shift_x")) c.shift_x = to_double("problem.shift_x", *v);
  if (auto v = get("problem.shift_y")) c.shift_y = to_double("problem.shift_y", *v);
  if (auto v = get("problem.s")) c.s = *v;
  if (auto v = get("problem.s_file")) c.s_file = *v;
  if (auto v = get("problem.exact_forward")) c.exact_forward = to_bool("problem.exact_forward", *v);
  if (auto v = get("grid.mode")) c.grid_mode = wrap([&] { return grid_mode_from_string(*v); });
  if (auto v = get("grid.nr")) c.nr = to_int("grid.nr", *v);
  if (auto v = get("grid.nphi")) c.nphi = to_int("grid.nphi", *v);
  auto& s = c.solver;
  if (auto v = get("solver.newton_tol")) s.newton_tol = to_double("solver.newton_tol", *v);
  if (auto v = get("solver.path_tol")) s.path_tol = to_double("solver.path_tol", *v);
  if (auto v = get("solver.max_newton_iters")) s.max_newton_iters = to_int("solver.max_newton_iters", *v);
  if (auto v = get("solver.backtrack")) s.backtrack = to_double("solver.backtrack", *v);
  if (auto v = get("solver.min_step")) s.min_step = to_double("solver.min_step", *v);
  if (auto v = get("solver.dt_initial")) s.dt_initial = to_double("solver.dt_initial", *v);
  if (auto v = get("solver.dt_floor")) s.dt_floor = to_double("solver.dt_floor", *v);
  if (auto v = get("solver.convexity_floor")) s.convexity_floor = to_double("solver.convexity_floor", *v);
  if (auto v = get("solver.boundary_tol")) s.boundary_tol = to_double("solver.boundary_tol", *v);
  if (auto v = get("solver.integral_tol")) s.integral_tol = to_double("solver.integral_tol", *v);
  if (auto v = get("solver.hypothesis_tol")) s.hypothesis_tol = to_double("solver.hypothesis_tol", *v);
  if (auto v = get("solver.psi_power")) s.psi_power = to_double("solver.psi_power", *v);
  if (auto v = get("solver.translation_tol")) s.translation_tol = to_double("solver.translation_tol", *v);
  if (auto v = get("output.dir")) c.out_dir = *v;
  if (auto v = get("output.obj")) c.write_obj = to_bool("output.obj", *v);
  if (auto v = get("output.seed")) {
    const double x = to_double("output.seed", *v);
    if (x < 0 || x != std::floor(x)) throw ConfigError("output.seed must be a non-negative integer");
    c.seed = static_cast<std::uint64_t>(x);
  }
  if (auto v = get("validate.af_trials")) c.af_trials = to_int("validate.af_trials", *v);
  if (auto v = get("validate.inject")) c.inject = *v;

  if (overrides.out_dir) c.out_dir = *overrides.out_dir;
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.grid_scale) {
    const double f = *overrides.grid_scale;
    if (!(f > 0.0)) throw ConfigError("--grid-scale must be positive");
    c.nr = std::max(1, static_cast<int>(std::lround(c.nr * f)));
    if (c.nphi > 0) c.nphi = 2 * std::max(1, static_cast<int>(std::lround(c.nphi * f / 2.0)));
  }

  // ranges
  if (c.n < 2 || c.n > 8) throw ConfigError("problem.n must lie in [2, 8]");
  if (c.k < 1 || c.k > c.n) throw ConfigError("problem.k must satisfy 1 <= k <= n");
  if (!(c.theta > 0.0 && c.theta <= M_PI / 2)) throw ConfigError("problem.theta must lie in (0, pi/2]");
  if (c.nr < 4 || c.nr > 4096) throw ConfigError("grid.nr must lie in [4, 4096]");
  if (c.nphi != 0 && (c.nphi < 4 || c.nphi % 2 || c.nphi > 8192))
    throw ConfigError("grid.nphi must be 0 (default) or an even number in [4, 8192]");
  if (c.grid_mode == GridMode::full2d && c.n != 2) throw ConfigError("grid.mode = full2d requires problem.n = 2");
  static const std::set<std::string> phis = {"constant", "manufactured", "perturbed-even", "translated", "tilted",
                                             "csv"};
  if (!phis.count(c.phi)) throw ConfigError("problem.phi must be one of constant, manufactured, perturbed-even, "
                                            "translated, tilted, csv");
  if (c.phi == "csv") {
    if (c.phi_file.empty()) throw ConfigError("problem.phi = csv needs problem.phi_file");
    if (!fs::exists(c.phi_file)) throw ConfigError("problem.phi_file does not exist: " + c.phi_file.string());
  }
  static const std::set<std::string> fams = {"g_axi", "g2", "g3"};
  if (!fams.count(c.family)) throw ConfigError("problem.family must be one of g_axi, g2, g3");
  if (c.family != "g_axi" && c.grid_mode != GridMode::full2d)
    throw ConfigError("problem.family " + c.family + " needs grid.mode = full2d");
  if (!(c.scale > 0.0)) throw ConfigError("problem.scale must be positive");
  if (c.phi_value && !(*c.phi_value > 0.0)) throw ConfigError("problem.phi_value must be positive");
  static const std::set<std::string> ss = {"ell", "manufactured", "csv"};
  if (!ss.count(c.s)) throw ConfigError("problem.s must be one of ell, manufactured, csv");
  if (c.s == "csv") {
    if (c.s_file.empty()) throw ConfigError("problem.s = csv needs problem.s_file");
    if (!fs::exists(c.s_file)) throw ConfigError("problem.s_file does not exist: " + c.s_file.string());
  }
  if (c.af_trials < 0 || c.af_trials > 10000) throw ConfigError("validate.af_trials must lie in [0, 10000]");
  if (c.inject != "none" && c.inject != "noncapillary") throw ConfigError("validate.inject must be none or noncapillary");
  try {
    c.solver.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------------------------
// presets

namespace {

std::string effective_family(const RunConfig& cfg, const std::string& preset) {
  if (preset == "perturbed-even") return cfg.grid_mode == GridMode::full2d ? "g2" : "g_axi";
  return cfg.family;
}

}  // namespace

ScalarField build_phi(const RunConfig& cfg, const DomainPtr& domain) {
  const auto& d = *domain;
  const int n = d.dim(), k = cfg.k;
  const auto N = static_cast<Eigen::Index>(d.size());
  if (cfg.phi == "constant") {
    const double c = cfg.phi_value ? *cfg.phi_value : binomial(n, k) * std::pow(cfg.scale, k);
    return ScalarField(domain, Eigen::VectorXd::Constant(N, c));
  }
  if (cfg.phi == "manufactured" || cfg.phi == "perturbed-even") {
    const auto fam = effective_family(cfg, cfg.phi);
    manufactured_family(fam, cfg.eps, domain);  // admissibility check
    return forward_exact(manufactured_analytic(fam, cfg.eps, d.theta()), domain, k);
  }
  if (cfg.phi == "translated") {
    AnalyticField g = d.mode() == GridMode::full2d ? AnalyticField::g2(d.theta()) + AnalyticField::g3(d.theta())
                                                   : AnalyticField::g_axi(d.theta());
    const ScalarField h = (AnalyticField::ell(d.theta()) + cfg.eps * g).sample(domain, true);
    const auto psi = cfg.solver.psi_power ? EntropyWeight::power(*cfg.solver.psi_power) : EntropyWeight::for_order(k);
    const auto tp = find_translation_point(h, psi, cfg.solver.translation_tol);
    Eigen::VectorXd v = h.values();
    if (d.mode() == GridMode::full2d)
      for (Eigen::Index p = 0; p < N; ++p) {
        const auto up = static_cast<std::size_t>(p);
        const double sr = std::sin(d.rho(d.ring_of(up))), ph = d.phi(d.angle_of(up));
        v[p] -= sr * (std::cos(ph) * tp.z[0] + std::sin(ph) * tp.z[1]);
      }
    if (!(v.minCoeff() > 0.0)) throw HypothesisError("translated preset: shifted support is not positive");
    return ScalarField(domain, v.unaryExpr([k](double x) { return std::pow(x, -static_cast<double>(k)); }));
  }
  if (cfg.phi == "tilted") {
    Eigen::VectorXd v(N);
    for (Eigen::Index p = 0; p < N; ++p) {
      const auto up = static_cast<std::size_t>(p);
      const double sr = std::sin(d.rho(d.ring_of(up)));
      const double c1 = d.mode() == GridMode::full2d ? std::cos(d.phi(d.angle_of(up))) : 1.0;
      v[p] = binomial(n, k) * (1.0 + cfg.eps * sr * c1);
    }
    return ScalarField(domain, std::move(v));
  }
  return interpolate(read_samples_csv(cfg.phi_file), domain, false);
}

ScalarField build_support(const RunConfig& cfg, const DomainPtr& domain) {
  if (cfg.s == "ell") return ell(domain).with_values(cfg.scale * ell(domain).values());
  if (cfg.s == "manufactured") return manufactured_family(cfg.family, cfg.eps, domain);
  // solution CSVs carry column "s"; sampled fields carry "value"
  std::ifstream is(cfg.s_file);
  std::string header;
  std::getline(is, header);
  const bool solution = header.find(",s,") != std::string::npos;
  auto data = read_samples_csv(cfg.s_file, solution ? "s" : "value");
  if (domain->mode() == GridMode::axisym && data.angular) {
    // solution CSVs always carry phi; on axisymmetric grids it is the single angle 0
    data.angular = false;
    data.phi.clear();
  }
  return interpolate(data, domain, true);
}

std::string format_check(const CheckReport& c) {
  std::ostringstream os;
  os << "check " << c.name << " values=";
  for (std::size_t i = 0; i < c.values.size(); ++i) os << (i ? "," : "") << format_double(c.values[i]);
  os << " tol=" << format_double(c.tolerance) << " grid=[" << c.grid << "] " << (c.pass ? "PASS" : "FAIL");
  if (!c.note.empty()) os << " # " << c.note;
  return os.str();
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const HypothesisError& e) {
    err << "hypothesis violation: " << e.what() << '\n';
    return exit_hypothesis;
  } catch (const ContinuationStall& e) {
    err << "continuation stall: " << e.what() << '\n';
    return exit_stall;
  } catch (const NewtonError& e) {
    err << "continuation stall (Newton failure): " << e.what() << '\n';
    return exit_stall;
  } catch (const EllipticityError& e) {
    err << "continuation stall (ellipticity lost): " << e.what() << '\n';
    return exit_stall;
  } catch (const ConvexityError& e) {
    err << "continuation stall (convexity floor): " << e.what() << '\n';
    return exit_stall;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  }
}

// ---------------------------------------------------------------------------------------------
// commands

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

}  // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& log) {
  const auto domain = cfg.domain();
  ensure_dir(cfg.out_dir);
  ProblemSpec problem{cfg.k, cfg.mode, cfg.symmetry, build_phi(cfg, domain), std::nullopt, std::nullopt};
  if (cfg.grid_mode == GridMode::full2d && (cfg.shift_x != 0.0 || cfg.shift_y != 0.0))
    problem.initial_shift = Eigen::Vector2d(cfg.shift_x, cfg.shift_y);
  const auto report = solve_cm(problem, cfg.solver);

  write_solution_csv(cfg.out_dir / "solution.csv", report.solution, residual(report.solution, problem.phi, cfg.k));
  auto os = open_text(cfg.out_dir / "report.txt");
  os << "capcm solve report\n";
  os << "grid = " << domain->describe() << '\n';
  os << "problem.k = " << cfg.k << "\nproblem.mode = " << to_string(cfg.mode)
     << "\nproblem.symmetry = " << to_string(cfg.symmetry) << "\nproblem.phi = " << cfg.phi << '\n';
  os << "residual = " << format_double(report.residual) << '\n';
  os << "min_lambda = " << format_double(report.min_lambda) << '\n';
  os << "multipliers =";
  for (Eigen::Index i = 0; i < report.multipliers.size(); ++i) os << ' ' << format_double(report.multipliers[i]);
  os << '\n';
  for (const auto& st : report.steps) {
    os << "step stage=" << st.stage << " t=" << format_double(st.t) << " dt=" << format_double(st.dt)
       << " newton=" << st.newton_iterations << " residual=" << format_double(st.residual)
       << " min_lambda=" << format_double(st.min_lambda);
    if (st.z.size()) {
      os << " z=";
      for (Eigen::Index i = 0; i < st.z.size(); ++i) os << (i ? "," : "") << format_double(st.z[i]);
    }
    os << '\n';
  }
  bool all = true;
  for (const auto& c : report.checks) {
    os << format_check(c) << '\n';
    all = all && c.pass;
  }
  for (const auto& w : report.warnings) os << "warning " << w << '\n';
  os << "status = " << (all ? "PASS" : "FAIL") << '\n';

  if (cfg.write_obj) {
    if (domain->mode() != GridMode::full2d)
      log << "note: OBJ export skipped (needs n = 2, grid.mode = full2d)\n";
    else
      write_obj(cfg.out_dir / "mesh.obj", reconstruct(report.solution));
  }
  log << "solve: " << report.steps.size() << " steps, residual " << format_double(report.residual)
      << ", min lambda " << format_double(report.min_lambda) << ", " << report.seconds << " s, "
      << (all ? "PASS" : "FAIL") << '\n';
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return all ? exit_ok : exit_check_failed;
}

int cmd_forward(const RunConfig& cfg, std::ostream& log) {
  const auto domain = cfg.domain();
  ensure_dir(cfg.out_dir);
  ScalarField phi = [&] {
    if (cfg.exact_forward) {
      if (cfg.s == "csv") throw ConfigError("problem.exact_forward needs an analytic problem.s");
      const auto f = cfg.s == "ell" ? cfg.scale * AnalyticField::ell(cfg.theta)
                                    : manufactured_analytic(cfg.family, cfg.eps, cfg.theta);
      return forward_exact(f, domain, cfg.k);
    }
    return forward(build_support(cfg, domain), cfg.k);
  }();
  if (!(phi.values().minCoeff() > 0.0)) log << "warning: forward data is not positive everywhere\n";
  write_samples_csv(cfg.out_dir / "phi.csv", phi);
  log << "forward: wrote " << (cfg.out_dir / "phi.csv").string() << " (min " << format_double(phi.values().minCoeff())
      << ", max " << format_double(phi.values().maxCoeff()) << ")\n";
  return exit_ok;
}

int cmd_export_mesh(const RunConfig& cfg, std::ostream& log) {
  if (cfg.n != 2 || cfg.grid_mode != GridMode::full2d)
    throw ConfigError("export-mesh needs n = 2 on a full2d grid (no 3-manifold export)");
  const auto domain = cfg.domain();
  ensure_dir(cfg.out_dir);
  const auto s = build_support(cfg, domain);
  const auto mesh = reconstruct(s);
  write_obj(cfg.out_dir / "mesh.obj", mesh);
  const double height = mesh.vertices.bottomRows(domain->nphi()).col(2).cwiseAbs().maxCoeff();
  log << "export-mesh: " << mesh.vertex_count() << " vertices, " << mesh.faces.size() + mesh.base_faces.size()
      << " faces, max |x3| on boundary ring " << format_double(height) << '\n';
  for (const auto& w : mesh.warnings) log << "warning: " << w << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------------------------------------
// validate

namespace {

struct SuiteResult {
  std::vector<CheckReport> checks;
  std::vector<std::string> af_rows;
};

CheckReport make_check(std::string name, std::vector<double> values, double tol, bool pass, const CapDomain& d,
                       std::string note) {
  return CheckReport{std::move(name), std::move(values), tol, pass, d.describe(), std::move(note)};
}

AnalyticField perturbation(const RunConfig& cfg) {
  return cfg.grid_mode == GridMode::full2d ? AnalyticField::g2(cfg.theta) + AnalyticField::g3(cfg.theta)
                                           : AnalyticField::g_axi(cfg.theta);
}

void run_resolution(const RunConfig& cfg, const DomainPtr& domain, std::mt19937_64& rng, SuiteResult& out) {
  const auto& d = *domain;
  const int n = d.dim(), k = cfg.k;
  const double th = d.theta();
  const ScalarField l = ell(domain);
  const AnalyticField g = perturbation(cfg);
  const ScalarField s_pert = (AnalyticField::ell(th) + 0.05 * g).sample(domain, true);

  // divergence identity
  {
    const Eigen::VectorXd phi = forward(s_pert, k).values();
    const double scale = phi.cwiseAbs().maxCoeff() * d.total_measure();
    const double h_ratio = std::pow(d.nr() / 200.0, -2.0);
    const double tol = 1e-6 * scale * std::max(1.0, h_ratio);
    const double v0 = divergence_identity(l, k).cwiseAbs().maxCoeff();
    out.checks.push_back(make_check("divergence_identity[ell]", {v0}, 1e-10, v0 <= 1e-10, d, "max_i |int sigma_k zeta_i|"));
    const double v1 = divergence_identity(s_pert, k).cwiseAbs().maxCoeff();
    out.checks.push_back(make_check("divergence_identity[ell+0.05g]", {v1}, tol, v1 <= tol, d,
                                    "tol 1e-6 |phi| |C| scaled by (200/Nr)^2"));
  }
  // Minkowski-type identity
  {
    const auto m0 = minkowski_identity(l, k);
    const double e0 = std::abs(m0.ratio - m0.expected);
    out.checks.push_back(make_check("minkowski_identity[ell]", {m0.ratio, m0.expected}, 1e-3, e0 <= 1e-3, d,
                                    "ratio vs binom(n,k-1)/binom(n,k)"));
    const auto m1 = minkowski_identity(s_pert, k);
    const double e1 = std::abs(m1.ratio - m1.expected);
    out.checks.push_back(make_check("minkowski_identity[ell+0.05g]", {m1.ratio, m1.expected}, 5e-3, e1 <= 5e-3, d,
                                    "ratio vs binom(n,k-1)/binom(n,k)"));
  }
  // AF inequality: seeded trials and homothety equality
  {
    std::uniform_real_distribution<double> U(-0.05, 0.05);
    std::vector<AnalyticField> modes = {AnalyticField::g_axi(th)};
    if (d.mode() == GridMode::full2d) {
      modes.push_back(AnalyticField::g2(th));
      modes.push_back(AnalyticField::g3(th));
    }
    auto draw = [&] {
      AnalyticField f = AnalyticField::ell(th);
      for (const auto& m : modes) f = f + U(rng) * m;
      return f.sample(domain, true);
    };
    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    const double af_tol = 1e-8 * std::max(1.0, std::pow(d.nr() / 200.0, -2.0));
    for (int t = 0; t < cfg.af_trials; ++t) {
      const ScalarField a = draw(), b = draw();
      const auto m = af_inequality(a, b, k);
      const double rel = m.margin / m.scale;
      worst = std::min(worst, rel);
      if (rel < -af_tol) ++failures;
      out.af_rows.push_back(std::to_string(d.nr()) + "," + std::to_string(t) + "," + format_double(m.lhs) + "," +
                            format_double(m.rhs) + "," + format_double(m.margin));
    }
    if (cfg.af_trials > 0)
      out.checks.push_back(make_check("af_inequality[random]", {worst, static_cast<double>(failures)}, af_tol,
                                      failures == 0, d, "min margin/scale over seeded trials, tol scaled by (200/Nr)^2"));
    const auto eq = af_inequality(s_pert, s_pert.with_values(2.0 * s_pert.values()), k);
    const double rel = std::abs(eq.margin) / eq.scale;
    out.checks.push_back(make_check("af_inequality[homothety]", {rel}, 1e-8, rel <= 1e-8, d, "|margin|/scale"));
  }
  // a priori bounds
  for (const auto* f : {&l, &s_pert}) {
    auto c = gradient_bound(*f);
    c.name += f == &l ? "[ell]" : "[ell+0.05g]";
    out.checks.push_back(c);
    auto cm = convexity_monitor(*f, cfg.solver.convexity_floor);
    cm.name += f == &l ? "[ell]" : "[ell+0.05g]";
    out.checks.push_back(cm);
  }
  if (d.mode() == GridMode::full2d) {
    const ScalarField z1 = horizontal_coordinate(domain, 0);
    auto cm = convexity_monitor(z1, cfg.solver.convexity_floor);
    const double lam = cm.values[0];
    const double tol = d.h() * d.h();
    out.checks.push_back(make_check("convexity_monitor[zeta_1 flagged]", {lam}, tol, !cm.pass && std::abs(lam) <= tol,
                                    d, "degenerate control must be flagged, |min| <= h^2"));
  }
  // capillarity of the manufactured family
  {
    const double r = robin_residual(s_pert).max_abs();
    const double tol = cfg.solver.boundary_tol;
    out.checks.push_back(make_check("capillarity[ell+0.05g]", {r}, tol, r <= tol, d, "max |s_rho - cot s|"));
  }
  if (cfg.inject == "noncapillary") {
    const ScalarField bad = AnalyticField::cos_rho().sample(domain, false);
    const double r = robin_residual(bad).max_abs();
    const double tol = cfg.solver.boundary_tol;
    out.checks.push_back(make_check("capillarity[injected cos rho]", {r}, tol, r <= tol, d, "injected control"));
  }
  (void)n;
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.out_dir);
  std::mt19937_64 rng(cfg.seed);
  SuiteResult res;
  const auto coarse = cfg.domain();
  RunConfig fine_cfg = cfg;
  fine_cfg.nr = 2 * cfg.nr;
  fine_cfg.nphi = cfg.nphi ? 2 * cfg.nphi : 0;
  const auto fine = fine_cfg.domain();
  run_resolution(cfg, coarse, rng, res);
  run_resolution(fine_cfg, fine, rng, res);
  {
    const AnalyticField s = AnalyticField::ell(cfg.theta) + 0.05 * perturbation(cfg);
    res.checks.push_back(sigma1_monitor(s.sample(coarse, true), s.sample(fine, true)));
  }

  auto os = open_text(cfg.out_dir / "validate_report.txt");
  os << "capcm validate report\nseed = " << cfg.seed << "\nn = " << cfg.n << "\nk = " << cfg.k
     << "\ntheta = " << format_double(cfg.theta) << '\n';
  bool all = true;
  for (const auto& c : res.checks) {
    os << format_check(c) << '\n';
    log << format_check(c) << '\n';
    all = all && c.pass;
  }
  os << "status = " << (all ? "PASS" : "FAIL") << '\n';
  auto af = open_text(cfg.out_dir / "af_trials.csv");
  af << "nr,trial,lhs,rhs,margin\n";
  for (const auto& r : res.af_rows) af << r << '\n';
  write_samples_csv(cfg.out_dir / "validate_field.csv",
                    (AnalyticField::ell(cfg.theta) + 0.05 * perturbation(cfg)).sample(coarse, true));
  log << "validate: " << (all ? "PASS" : "FAIL") << '\n';
  return all ? exit_ok : exit_check_failed;
}

// ---------------------------------------------------------------------------------------------
// selftest

int cmd_selftest(std::ostream& log) {
  int failed = 0;
  auto line = [&](const std::string& name, double value, double tol, bool pass) {
    log << (pass ? "PASS " : "FAIL ") << name << " value=" << format_double(value) << " tol=" << format_double(tol)
        << '\n';
    if (!pass) ++failed;
  };
  const double th = M_PI / 3.0;
  SolverConfig sc;

  {  // cap recovery, n = 3, k = 2
    const auto d = CapDomain::build(3, th, GridMode::axisym, 32);
    ProblemSpec p{2, HomotopyMode::even, Symmetry::none,
                  ScalarField(d, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d->size()), 3.0)), {}, {}};
    const auto rep = solve_cm(p, sc);
    const double err = (rep.solution.values() - ell(d).values()).cwiseAbs().maxCoeff();
    line("cap recovery (n=3, k=2, Nr=32)", err, 1e-3, err <= 1e-3);
  }
  {  // translation point
    const auto d = CapDomain::build(2, th, GridMode::full2d, 16);
    const auto h = (AnalyticField::ell(th) + 0.1 * AnalyticField::zeta(0)).sample(d, true);
    const auto tp = find_translation_point(h, EntropyWeight::power(-1.0));
    const double err = (tp.z - Eigen::Vector2d(0.1, 0.0)).cwiseAbs().maxCoeff();
    line("translation point z = (0.1, 0)", err, 1e-8, err <= 1e-8);
  }
  {  // Jacobian vs directional difference
    const auto d = CapDomain::build(2, th, GridMode::full2d, 8);
    const auto s = (AnalyticField::ell(th) + 0.05 * AnalyticField::g2(th)).sample(d, true);
    const auto phi = ScalarField(d, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d->size())));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(d->size()));
    for (auto& x : v) x = U(rng);
    const double eps = 1e-6;
    const Eigen::VectorXd Jv = assemble_jacobian(s, 2) * v;
    const Eigen::VectorXd fd =
        (residual(s.with_values(s.values() + eps * v), phi, 2).values() -
         residual(s.with_values(s.values() - eps * v), phi, 2).values()) / (2.0 * eps);
    const double rel = (fd - Jv).norm() / Jv.norm();
    line("jacobian directional check", rel, 1e-5, rel <= 1e-5);
  }
  {  // mesh of the unit cap
    const auto d = CapDomain::build(2, th, GridMode::full2d, 16);
    const auto mesh = reconstruct(ell(d));
    double dev = 0.0;
    for (Eigen::Index r = 0; r < mesh.vertices.rows(); ++r) {
      Eigen::Vector3d x = mesh.vertices.row(r).transpose();
      x[2] += std::cos(th);
      dev = std::max(dev, std::abs(x.norm() - 1.0));
    }
    line("cap mesh |X + cos(theta) E3| = 1", dev, 1e-4, dev <= 1e-4);
  }
  {  // config parser
    bool ok = false;
    try {
      make_run_config(parse_config("problem.bogus = 1\n"));
    } catch (const ConfigError&) {
      ok = true;
    }
    line("config rejects unknown keys", ok ? 0.0 : 1.0, 0.0, ok);
  }
  log << (failed ? "selftest: FAIL\n" : "selftest: PASS\n");
  return failed ? exit_check_failed : exit_ok;
}

}  // namespace capcm

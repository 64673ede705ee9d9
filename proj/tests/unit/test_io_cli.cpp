#include <doctest.h>

#include "capcm/cli.hpp"
#include "capcm/error.hpp"
#include "capcm/io.hpp"
#include "capcm/support_geometry.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace capcm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("capcm_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("format_double keeps 17 significant digits") {
  for (double v : {M_PI, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.1}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("config parsing") {
  auto m = parse_config("# comment\nproblem.n = 3\n\n  grid.nr=40   # trailing\nproblem.theta = pi/3\n");
  CHECK(m.size() == 3);
  CHECK(m.at("grid.nr") == "40");
  CHECK_THROWS_AS(parse_config("problem.n 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("problem.n = 3\nproblem.n = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(" = 3\n"), ConfigError);

  auto c = make_run_config(m);
  CHECK(c.n == 3);
  CHECK(c.nr == 40);
  CHECK(c.theta == doctest::Approx(M_PI / 3));
  CHECK_THROWS_AS(make_run_config(parse_config("problem.bogus = 1\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("problem.k = 5\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("problem.theta = 2\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("grid.nr = ten\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("problem.n = 3\ngrid.mode = full2d\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("problem.phi = csv\nproblem.phi_file = /no/such/file.csv\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("solver.dt_floor = 0.5\n")), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config("problem.mode = sideways\n")), ConfigError);

  CliOverrides o;
  o.grid_scale = 2.0;
  o.seed = 99;
  auto g = make_run_config(parse_config("grid.nr = 20\ngrid.nphi = 40\nproblem.n = 2\ngrid.mode = full2d\n"), o);
  CHECK(g.nr == 40);
  CHECK(g.nphi == 80);
  CHECK(g.seed == 99u);
}

TEST_CASE("angles") {
  CHECK(parse_angle("pi/3") == doctest::Approx(M_PI / 3));
  CHECK(parse_angle("2*pi/5") == doctest::Approx(2 * M_PI / 5));
  CHECK(parse_angle("1.25") == doctest::Approx(1.25));
  CHECK(parse_angle("pi") == doctest::Approx(M_PI));
}

TEST_CASE("sample csv round trip is exact on the same grid") {
  auto d = CapDomain::build(2, M_PI / 3, GridMode::full2d, 10, 20);
  Eigen::VectorXd v(200);
  for (Eigen::Index p = 0; p < 200; ++p) v[p] = std::sin(0.37 * static_cast<double>(p)) + 2.0;
  ScalarField f(d, v, true);
  const auto path = scratch("f.csv");
  write_samples_csv(path, f);
  CHECK(slurp(path).rfind("rho,phi,value\n", 0) == 0);
  auto data = read_samples_csv(path);
  CHECK(data.angular);
  auto back = interpolate(data, d, true);
  CHECK(back.values() == f.values());

  auto a = CapDomain::build(3, M_PI / 3, GridMode::axisym, 12);
  ScalarField fa(a, Eigen::VectorXd::LinSpaced(12, 1.0, 2.0));
  write_samples_csv(scratch("a.csv"), fa);
  CHECK(slurp(scratch("a.csv")).rfind("rho,value\n", 0) == 0);
  CHECK(interpolate(read_samples_csv(scratch("a.csv")), a, false).values() == fa.values());
}

TEST_CASE("interpolation onto a finer grid is bilinear") {
  auto coarse = CapDomain::build(2, M_PI / 3, GridMode::full2d, 20, 40);
  auto fine = CapDomain::build(2, M_PI / 3, GridMode::full2d, 40, 80);
  auto fn = [](double r, double p) { return 1.0 + 0.3 * r + 0.1 * std::cos(p); };
  Eigen::VectorXd v(static_cast<Eigen::Index>(coarse->size()));
  for (std::size_t p = 0; p < coarse->size(); ++p)
    v[static_cast<Eigen::Index>(p)] = fn(coarse->rho(coarse->ring_of(p)), coarse->phi(coarse->angle_of(p)));
  write_samples_csv(scratch("c.csv"), ScalarField(coarse, v));
  auto f = interpolate(read_samples_csv(scratch("c.csv")), fine, false);
  double e = 0.0;
  for (std::size_t p = 0; p < fine->size(); ++p)
    e = std::max(e, std::abs(f[p] - fn(fine->rho(fine->ring_of(p)), fine->phi(fine->angle_of(p)))));
  // linear in rho exactly; cos(phi) carries the O(dphi^2) interpolation error
  CHECK(e < 0.1 * std::pow(2 * M_PI / 40, 2));
}

TEST_CASE("malformed csv is rejected") {
  std::ofstream(scratch("bad.csv")) << "rho,value\n0.1,abc\n";
  CHECK_THROWS_AS(read_samples_csv(scratch("bad.csv")), ConfigError);
  std::ofstream(scratch("bad2.csv")) << "x,y\n0.1,1\n";
  CHECK_THROWS_AS(read_samples_csv(scratch("bad2.csv")), ConfigError);
  CHECK_THROWS_AS(read_samples_csv(scratch("missing.csv")), ConfigError);
}

TEST_CASE("solution csv header and obj round trip") {
  auto d = CapDomain::build(2, M_PI / 3, GridMode::full2d, 8, 16);
  auto s = ell(d);
  write_solution_csv(scratch("sol.csv"), s, ScalarField(d, Eigen::VectorXd::Zero(128)));
  const auto text = slurp(scratch("sol.csv"));
  CHECK(text.rfind("rho,phi,s,lambda_min,residual\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 129);
  auto sv = read_samples_csv(scratch("sol.csv"), "s");
  CHECK(interpolate(sv, d, true).values() == s.values());

  auto mesh = reconstruct(s);
  write_obj(scratch("m.obj"), mesh);
  auto back = read_obj(scratch("m.obj"));
  REQUIRE(back.vertices.size() == 8u * 16u + 16u);
  CHECK(back.faces.size() == mesh.faces.size() + mesh.base_faces.size());
  for (std::size_t v = 0; v < back.vertices.size(); ++v)
    for (int c = 0; c < 3; ++c) CHECK(back.vertices[v][static_cast<std::size_t>(c)] == mesh.vertices(static_cast<Eigen::Index>(v), c));
  CHECK(back.faces[0][0] == mesh.faces[0][0]);
  const auto obj = slurp(scratch("m.obj"));
  CHECK(obj.find("\nf ") != std::string::npos);
  std::istringstream lines(obj);
  std::string line;
  int min_index = 1 << 30, max_index = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("f ", 0) != 0) continue;
    std::istringstream fl(line.substr(2));
    for (int q; fl >> q;) min_index = std::min(min_index, q), max_index = std::max(max_index, q);
  }
  CHECK(min_index == 1);
  CHECK(max_index == 8 * 16 + 16);
}

TEST_CASE("pipelines write their artifacts") {
  RunConfig c = make_run_config(parse_config("problem.n = 2\nproblem.k = 2\ngrid.mode = full2d\ngrid.nr = 16\n"
                                             "problem.mode = even\nproblem.phi = constant\noutput.obj = true\n"));
  c.out_dir = scratch("solve");
  std::ostringstream log;
  CHECK(cmd_solve(c, log) == exit_ok);
  CHECK(fs::exists(c.out_dir / "solution.csv"));
  CHECK(fs::exists(c.out_dir / "report.txt"));
  CHECK(fs::exists(c.out_dir / "mesh.obj"));

  c.out_dir = scratch("forward");
  CHECK(cmd_forward(c, log) == exit_ok);
  auto phi = read_samples_csv(c.out_dir / "phi.csv");
  for (double v : phi.value) CHECK(v == doctest::Approx(1.0).epsilon(2e-2));

  c.out_dir = scratch("mesh");
  CHECK(cmd_export_mesh(c, log) == exit_ok);
  CHECK(read_obj(c.out_dir / "mesh.obj").vertices.size() == 16u * 32u + 32u);

  RunConfig a = make_run_config(parse_config("problem.n = 3\ngrid.nr = 16\n"));
  a.out_dir = scratch("bad_mesh");
  CHECK_THROWS_AS(cmd_export_mesh(a, log), ConfigError);
  CHECK(guarded([&] { return cmd_export_mesh(a, log); }, log) == exit_config);
}

TEST_CASE("forward then solve round trip") {
  RunConfig f = make_run_config(parse_config("problem.n = 3\nproblem.k = 2\ngrid.nr = 60\nproblem.s = manufactured\n"
                                             "problem.family = g_axi\nproblem.eps = 0.1\n"));
  f.out_dir = scratch("rt_fwd");
  std::ostringstream log;
  REQUIRE(cmd_forward(f, log) == exit_ok);
  RunConfig s = make_run_config(parse_config("problem.n = 3\nproblem.k = 2\ngrid.nr = 60\nproblem.phi = csv\nproblem.phi_file = " +
                                             (f.out_dir / "phi.csv").string() + "\n"));
  s.out_dir = scratch("rt_solve");
  REQUIRE(cmd_solve(s, log) == exit_ok);
  auto sol = read_samples_csv(s.out_dir / "solution.csv", "s");
  const double th = M_PI / 3, a = std::cos(th) / (std::sin(th) * std::sin(th));
  double e = 0.0;
  for (std::size_t q = 0; q < sol.rho.size(); ++q) {
    const double r = sol.rho[q];
    e = std::max(e, std::abs(sol.value[q] - (1 - std::cos(th) * std::cos(r) + 0.1 * std::exp(-a * std::cos(r)))));
  }
  CHECK(e < 1e-4);
}

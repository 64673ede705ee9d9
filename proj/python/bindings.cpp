#include "capcm/cli.hpp"
#include "capcm/continuation.hpp"
#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"
#include "capcm/io.hpp"
#include "capcm/support_geometry.hpp"
#include "capcm/validation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace capcm;

namespace {

py::dict step_dict(const StepRecord& st) {
  py::dict d;
  d["stage"] = st.stage;
  d["t"] = st.t;
  d["newton_iterations"] = st.newton_iterations;
  d["residual"] = st.residual;
  d["min_lambda"] = st.min_lambda;
  d["z"] = st.z;
  d["dt"] = st.dt;
  return d;
}

py::dict check_dict(const CheckReport& c) {
  py::dict d;
  d["name"] = c.name;
  d["values"] = c.values;
  d["tolerance"] = c.tolerance;
  d["passed"] = c.pass;
  d["grid"] = c.grid;
  d["note"] = c.note;
  return d;
}

ScalarField field_on(const DomainPtr& d, const Eigen::VectorXd& v, bool capillary) {
  if (static_cast<std::size_t>(v.size()) != d->size())
    throw InvalidArgument("expected " + std::to_string(d->size()) + " node values, got " + std::to_string(v.size()));
  return ScalarField(d, v, capillary);
}

// runs one CLI pipeline from config text and returns (exit code, log)
py::tuple run_command(const std::string& command, const std::string& config, const std::string& out_dir) {
  std::ostringstream log;
  const int rc = guarded(
      [&] {
        CliOverrides ov;
        if (!out_dir.empty()) ov.out_dir = out_dir;
        if (command == "selftest") return cmd_selftest(log);
        const auto cfg = make_run_config(parse_config(config), ov);
        if (command == "solve") return cmd_solve(cfg, log);
        if (command == "forward") return cmd_forward(cfg, log);
        if (command == "validate") return cmd_validate(cfg, log);
        if (command == "export-mesh") return cmd_export_mesh(cfg, log);
        throw ConfigError("unknown command '" + command + "'");
      },
      log);
  return py::make_tuple(rc, log.str());
}

}  // namespace

PYBIND11_MODULE(_capcm, m) {
  m.doc() = "Capillary Christoffel-Minkowski solver on spherical caps";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<HypothesisError>(m, "HypothesisError", base.ptr());
  py::register_exception<EllipticityError>(m, "EllipticityError", base.ptr());
  py::register_exception<NewtonError>(m, "NewtonError", base.ptr());
  py::register_exception<ContinuationStall>(m, "ContinuationStall", base.ptr());
  py::register_exception<ConvexityError>(m, "ConvexityError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<CapDomain, std::shared_ptr<CapDomain>>(m, "CapDomain")
      .def_static(
          "build",
          [](int n, double theta, const std::string& mode, int nr, int nphi) {
            return std::const_pointer_cast<CapDomain>(CapDomain::build(n, theta, grid_mode_from_string(mode), nr, nphi));
          },
          py::arg("n"), py::arg("theta"), py::arg("mode") = "axisym", py::arg("nr") = 64, py::arg("nphi") = 0)
      .def_property_readonly("n", &CapDomain::dim)
      .def_property_readonly("theta", &CapDomain::theta)
      .def_property_readonly("mode", [](const CapDomain& d) { return to_string(d.mode()); })
      .def_property_readonly("nr", &CapDomain::nr)
      .def_property_readonly("nphi", &CapDomain::nphi)
      .def_property_readonly("h", &CapDomain::h)
      .def_property_readonly("size", &CapDomain::size)
      .def_property_readonly("total_measure", &CapDomain::total_measure)
      .def_property_readonly("weights", [](const CapDomain& d) { return Eigen::VectorXd(d.weights()); })
      .def_property_readonly("rho",
                             [](const CapDomain& d) {
                               Eigen::VectorXd r(static_cast<Eigen::Index>(d.size()));
                               for (std::size_t p = 0; p < d.size(); ++p) r[static_cast<Eigen::Index>(p)] = d.rho(d.ring_of(p));
                               return r;
                             })
      .def_property_readonly("phi",
                             [](const CapDomain& d) {
                               Eigen::VectorXd r(static_cast<Eigen::Index>(d.size()));
                               for (std::size_t p = 0; p < d.size(); ++p) r[static_cast<Eigen::Index>(p)] = d.phi(d.angle_of(p));
                               return r;
                             })
      .def("__repr__", &CapDomain::describe);

  auto dom = [](const std::shared_ptr<CapDomain>& d) { return DomainPtr(d); };

  m.def("ell", [=](const std::shared_ptr<CapDomain>& d) { return Eigen::VectorXd(ell(dom(d)).values()); },
        "support function of the unit cap at the nodes");
  m.def(
      "forward",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& s, int k) {
        return Eigen::VectorXd(forward(field_on(dom(d), s, true), k).values());
      },
      py::arg("domain"), py::arg("s"), py::arg("k"));
  m.def(
      "lambda_min",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& s) {
        return Eigen::VectorXd(lambda_min_field(tau(field_on(dom(d), s, true))).values());
      },
      py::arg("domain"), py::arg("s"));

  m.def("sigma_k", &sigma_k, py::arg("matrix"), py::arg("k"));
  m.def("elementary_symmetric", &elementary_symmetric, py::arg("matrix"), py::arg("max_k"));
  m.def("newton_tensor", &newton_tensor, py::arg("matrix"), py::arg("k"));
  m.def("in_gamma_k", &in_gamma_k, py::arg("matrix"), py::arg("k"));

  m.def(
      "solve",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& phi, int k, const std::string& mode,
          std::optional<Eigen::VectorXd> initial) {
        ProblemSpec p{k, homotopy_mode_from_string(mode), Symmetry::none, field_on(dom(d), phi, false), {}, {}};
        if (initial) p.initial = field_on(dom(d), *initial, true);
        SolveReport r = [&] {
          py::gil_scoped_release release;
          return solve_cm(p, SolverConfig{});
        }();
        py::dict out;
        out["s"] = Eigen::VectorXd(r.solution.values());
        out["residual"] = r.residual;
        out["min_lambda"] = r.min_lambda;
        out["multipliers"] = r.multipliers;
        out["seconds"] = r.seconds;
        py::list steps, checks;
        for (const auto& st : r.steps) steps.append(step_dict(st));
        for (const auto& c : r.checks) checks.append(check_dict(c));
        out["steps"] = steps;
        out["checks"] = checks;
        out["warnings"] = r.warnings;
        return out;
      },
      py::arg("domain"), py::arg("phi"), py::arg("k"), py::arg("mode") = "even", py::arg("initial") = py::none());

  m.def(
      "translation_point",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& h, double power) {
        const auto psi = power == 2.0 ? EntropyWeight::square() : power == 0.0 ? EntropyWeight::neglog() : EntropyWeight::power(power);
        return Eigen::VectorXd(find_translation_point(field_on(dom(d), h, true), psi).z);
      },
      py::arg("domain"), py::arg("h"), py::arg("power") = 2.0, "power 0 selects -log");

  m.def(
      "reconstruct",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& s) {
        auto mesh = reconstruct(field_on(dom(d), s, true));
        std::vector<std::array<int, 3>> faces = mesh.faces;
        faces.insert(faces.end(), mesh.base_faces.begin(), mesh.base_faces.end());
        return py::make_tuple(mesh.vertices, faces, mesh.warnings);
      },
      py::arg("domain"), py::arg("s"), "vertices, 0-based faces and warnings");

  m.def(
      "minkowski_ratio",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& s, int k) {
        const auto r = minkowski_identity(field_on(dom(d), s, true), k);
        return py::make_tuple(r.ratio, r.expected);
      },
      py::arg("domain"), py::arg("s"), py::arg("k"));
  m.def(
      "af_margin",
      [=](const std::shared_ptr<CapDomain>& d, const Eigen::VectorXd& s1, const Eigen::VectorXd& s2, int k) {
        return af_inequality(field_on(dom(d), s1, true), field_on(dom(d), s2, true), k).margin;
      },
      py::arg("domain"), py::arg("s1"), py::arg("s2"), py::arg("k"));
  m.def(
      "manufactured",
      [=](const std::string& name, double eps, const std::shared_ptr<CapDomain>& d) {
        return Eigen::VectorXd(manufactured_family(name, eps, dom(d)).values());
      },
      py::arg("name"), py::arg("eps"), py::arg("domain"));

  m.def("format_double", &format_double);
  m.def("run", &run_command, py::arg("command"), py::arg("config") = "", py::arg("out_dir") = "",
        "run a CLI pipeline on config text; returns (exit_code, log)");
}

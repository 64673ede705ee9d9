#include "capcm/support_geometry.hpp"

#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"

#include <cmath>
#include <sstream>

namespace capcm {

ScalarField ell(const DomainPtr& domain) {
  const double ct = std::cos(domain->theta());
  Eigen::VectorXd v(static_cast<Eigen::Index>(domain->size()));
  for (int j = 0; j < domain->nr(); ++j) {
    const double value = 1.0 - ct * std::cos(domain->rho(j));
    for (int i = 0; i < domain->nphi(); ++i) v[static_cast<Eigen::Index>(domain->index(j, i))] = value;
  }
  return ScalarField(domain, std::move(v), true);
}

SymTensorField tau(const ScalarField& s) { return tau(s, s.closure()); }

SymTensorField tau(const ScalarField& s, BoundaryClosure closure) {
  auto H = covariant_hessian(s, closure);
  std::vector<Eigen::MatrixXd> m = H.matrices();
  for (std::size_t p = 0; p < m.size(); ++p) m[p].diagonal().array() += s[p];
  return SymTensorField(s.domain_ptr(), std::move(m));
}

CapMesh reconstruct(const ScalarField& s, const ReconstructOptions& options) {
  const auto& d = s.domain();
  if (options.strict && !s.capillary())
    throw InvalidArgument("reconstruct: field is not flagged capillary");
  const int n = d.dim();
  const bool full = d.mode() == GridMode::full2d;
  const double theta = d.theta();
  const double ct = std::cos(theta), st = std::sin(theta);

  CapMesh mesh;
  mesh.domain = s.domain_ptr();
  mesh.ring_offset = d.size();
  const auto N = static_cast<Eigen::Index>(d.size());
  mesh.vertices.resize(N + d.nphi(), n + 1);
  mesh.normals.resize(N + d.nphi(), n + 1);

  if (!s.capillary()) mesh.warnings.push_back("field is not flagged capillary");
  {
    const auto lam = lambda_min_field(tau(s));
    std::size_t bad = 0;
    for (std::size_t p = 0; p < d.size(); ++p)
      if (!(lam[p] > 0.0)) ++bad;
    if (bad) {
      std::ostringstream os;
      os << "tau[s] is not positive definite at " << bad << " node(s)";
      mesh.warnings.push_back(os.str());
    }
  }

  const auto g = gradient(s);
  for (int j = 0; j < d.nr(); ++j) {
    const double r = d.rho(j);
    const double cr = std::cos(r), sr = std::sin(r);
    for (int i = 0; i < d.nphi(); ++i) {
      const auto p = static_cast<Eigen::Index>(d.index(j, i));
      const Eigen::VectorXd w = omega_at(d, i);
      Eigen::VectorXd e_rho(n + 1), u(n + 1);
      e_rho << cr * w, -sr;
      u << sr * w, cr;
      Eigen::VectorXd X = g.components(p, 0) * e_rho + s[static_cast<std::size_t>(p)] * u;
      if (full) {
        Eigen::VectorXd e_phi(3);
        e_phi << -w[1], w[0], 0.0;
        X += g.components(p, 1) * e_phi;
      }
      mesh.vertices.row(p) = X.transpose();
      mesh.normals.row(p) = u.transpose();
    }
  }

  // Boundary ring from the support function of the boundary curve in the base plane.
  const auto h = boundary_body_support(s);
  for (int i = 0; i < d.nphi(); ++i) {
    const Eigen::VectorXd w = omega_at(d, i);
    Eigen::VectorXd X = Eigen::VectorXd::Zero(n + 1);
    X.head(n) = h.values[i] * w;
    if (full) {
      const int ip = (i + 1) % d.nphi(), im = (i + d.nphi() - 1) % d.nphi();
      const double dh = (h.values[ip] - h.values[im]) / (2.0 * std::sin(d.dphi()));
      X[0] += -dh * w[1];
      X[1] += dh * w[0];
    }
    Eigen::VectorXd u(n + 1);
    u << st * w, ct;
    mesh.vertices.row(N + i) = X.transpose();
    mesh.normals.row(N + i) = u.transpose();
  }

  if (full) {
    const int nr = d.nr(), np = d.nphi();
    auto vid = [&](int j, int i) {
      i %= np;
      return j == nr ? static_cast<int>(N) + i : static_cast<int>(d.index(j, i));
    };
    for (int j = 0; j < nr; ++j)
      for (int i = 0; i < np; ++i) {
        mesh.faces.push_back({vid(j, i), vid(j + 1, i), vid(j, i + 1)});
        mesh.faces.push_back({vid(j + 1, i), vid(j + 1, i + 1), vid(j, i + 1)});
      }
    for (int i = 1; i + 1 < np; ++i) mesh.faces.push_back({vid(0, 0), vid(0, i), vid(0, i + 1)});
    for (int i = 1; i + 1 < np; ++i) mesh.base_faces.push_back({vid(nr, 0), vid(nr, i + 1), vid(nr, i)});
  }
  return mesh;
}

Eigen::MatrixXd face_normals_at_vertices(const CapMesh& mesh) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(mesh.vertices.rows(), mesh.vertices.cols());
  if (mesh.vertices.cols() != 3) throw InvalidArgument("face normals need a surface in R^3");
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d a = mesh.vertices.row(f[0]).transpose();
    const Eigen::Vector3d b = mesh.vertices.row(f[1]).transpose();
    const Eigen::Vector3d c = mesh.vertices.row(f[2]).transpose();
    const Eigen::Vector3d nrm = (b - a).cross(c - a);  // length = twice the area
    for (int v : f) acc.row(v) += nrm.transpose();
  }
  for (Eigen::Index v = 0; v < acc.rows(); ++v) {
    const double len = acc.row(v).norm();
    if (len > 0.0) acc.row(v) /= len;
  }
  return acc;
}

BoundaryTrace contact_angle(const CapMesh& mesh) {
  const auto& d = *mesh.domain;
  if (mesh.faces.empty()) throw InvalidArgument("contact_angle needs a meshed (n = 2, full2d) surface");
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d a = mesh.vertices.row(f[0]).transpose();
    const Eigen::Vector3d b = mesh.vertices.row(f[1]).transpose();
    const Eigen::Vector3d c = mesh.vertices.row(f[2]).transpose();
    if ((b - a).cross(c - a).norm() <= 1e-300)
      throw InvalidArgument("contact_angle: degenerate face in mesh");
  }
  const auto nrm = face_normals_at_vertices(mesh);
  const int top = static_cast<int>(mesh.vertices.cols()) - 1;
  BoundaryTrace out{mesh.domain, Eigen::VectorXd(d.nphi())};
  for (int i = 0; i < d.nphi(); ++i)
    out.values[i] = nrm(static_cast<Eigen::Index>(mesh.ring_vertex(i)), top) - std::cos(d.theta());
  return out;
}

BoundaryTrace boundary_height(const ScalarField& s) {
  const auto& d = s.domain();
  const auto jet = boundary_jet(s);
  return BoundaryTrace{s.domain_ptr(), std::cos(d.theta()) * jet.value - std::sin(d.theta()) * jet.d_rho};
}

AreaDensity area_measure_density(const ScalarField& s) {
  const auto& d = s.domain();
  const auto T = tau(s);
  const auto& ev = T.eigenvalues();
  const auto l = ell(s.domain_ptr());
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
  std::vector<std::size_t> bad;
  for (std::size_t p = 0; p < d.size(); ++p) {
    v[static_cast<Eigen::Index>(p)] = l[p] * ev[p].prod();
    if (!(ev[p][0] > 0.0)) bad.push_back(p);
  }
  return AreaDensity{ScalarField(s.domain_ptr(), std::move(v)), std::move(bad)};
}

BoundaryTrace boundary_body_support(const ScalarField& s) {
  const auto jet = boundary_jet(s);
  return BoundaryTrace{s.domain_ptr(), jet.value / std::sin(s.domain().theta())};
}

}  // namespace capcm

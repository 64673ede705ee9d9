#pragma once

// Capillary support-function calculus: the cap reference function, the tensor
// tau[s] = Hess s + s g, reconstruction X = grad s + s u of the hypersurface, and boundary
// diagnostics.

#include "capcm/cap_domain.hpp"

#include <array>
#include <string>
#include <vector>

namespace capcm {

/// Reconstructed hypersurface.
///
/// Vertex rows follow the domain node order and are followed by a boundary ring of nphi
/// vertices on the base plane.  `faces` cover the lateral surface (with a fan closing the polar
/// ring); `base_faces` triangulate the planar boundary curve.  Faces exist for n = 2 only.
struct CapMesh {
  DomainPtr domain;
  Eigen::MatrixXd vertices;
  /// Outer unit normal u = zeta + cos(theta) E_{n+1} at every vertex.
  Eigen::MatrixXd normals;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<int, 3>> base_faces;
  std::size_t ring_offset = 0;
  std::vector<std::string> warnings;

  std::size_t vertex_count() const { return static_cast<std::size_t>(vertices.rows()); }
  std::size_t ring_vertex(int i) const { return ring_offset + static_cast<std::size_t>(i); }
};

/// 1 - cos(theta) cos(rho); capillary.
ScalarField ell(const DomainPtr& domain);

SymTensorField tau(const ScalarField& s);
SymTensorField tau(const ScalarField& s, BoundaryClosure closure);

struct ReconstructOptions {
  /// Reject fields that are not flagged capillary.
  bool strict = false;
};

CapMesh reconstruct(const ScalarField& s, const ReconstructOptions& options = {});

/// <nu, E_{n+1}> - cos(theta) at each ring vertex, with nu from area-weighted face normals.
BoundaryTrace contact_angle(const CapMesh& mesh);

/// Vertex normals recomputed from the lateral faces (area weighted, unit length).
Eigen::MatrixXd face_normals_at_vertices(const CapMesh& mesh);

/// X_{n+1} at rho = theta, i.e. cos(theta) s - sin(theta) s_rho, from one-sided differences.
BoundaryTrace boundary_height(const ScalarField& s);

struct AreaDensity {
  ScalarField density;
  std::vector<std::size_t> nonpositive_nodes;
};

/// ell * sigma_n(tau[s]); nodes where tau is not positive definite are listed.
AreaDensity area_measure_density(const ScalarField& s);

/// h(omega) = s(theta, omega) / sin(theta), the support function of the boundary curve.
BoundaryTrace boundary_body_support(const ScalarField& s);

}  // namespace capcm

#pragma once

// Discretization of the spherical cap C_theta in geodesic polar coordinates.
//
// A point of the cap is zeta = (sin(rho) omega, cos(rho) - cos(theta)) with rho in [0, theta]
// and omega in S^{n-1}; the unit normal of the cap there is u = zeta + cos(theta) E_{n+1}.
// Radial nodes are staggered, rho_j = (j + 1/2) h with h = theta / Nr, so the pole is never a
// node.  Across the pole a field is continued by parity, f(-rho, phi) = f(rho, phi + pi).
// At rho = theta the stencil is closed by a ghost ring whose values come either from the
// capillary (Robin) relation f_rho = cot(theta) f or from cubic extrapolation.
//
// Frame convention: e_rho = (cos(rho) omega, -sin(rho)); for n = 2 the angular frame vector is
// e_phi = (-sin(phi), cos(phi), 0).  Tensor and vector components are always given in this
// orthonormal frame.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace capcm {

enum class GridMode { axisym, full2d };

enum class BoundaryClosure {
  robin,        ///< ghost ring eliminated through f_rho = cot(theta) f
  extrapolate,  ///< ghost ring from cubic extrapolation of the last four rings
};

std::string to_string(GridMode mode);
GridMode grid_mode_from_string(const std::string& name);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Linear stencils mapping node values to frame derivatives at every node.
///
/// `hess_tt` is the tangential diagonal entry: f_phiphi / sin^2 + cot f_rho for n = 2, and
/// cot f_rho (shared by all n - 1 tangential directions) in axisymmetric mode.  `grad_phi` and
/// `hess_rt` are empty in axisymmetric mode.
struct Stencils {
  SparseMatrix grad_rho;
  SparseMatrix grad_phi;
  SparseMatrix hess_rr;
  SparseMatrix hess_rt;
  SparseMatrix hess_tt;
};

class CapDomain;
using DomainPtr = std::shared_ptr<const CapDomain>;

class CapDomain {
 public:
  /// Builds the staggered grid.  `nphi == 0` selects the default 2 * nr (full2d only).
  static DomainPtr build(int n, double theta, GridMode mode, int nr, int nphi = 0);

  int dim() const noexcept { return n_; }
  double theta() const noexcept { return theta_; }
  GridMode mode() const noexcept { return mode_; }
  int nr() const noexcept { return nr_; }
  /// Angular node count; 1 in axisymmetric mode.
  int nphi() const noexcept { return nphi_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(nr_) * nphi_; }

  double h() const noexcept { return h_; }
  double dphi() const noexcept { return dphi_; }
  double rho(int j) const noexcept { return (j + 0.5) * h_; }
  double phi(int i) const noexcept { return i * dphi_; }
  std::size_t index(int j, int i) const noexcept {
    return static_cast<std::size_t>(j) * nphi_ + i;
  }
  int ring_of(std::size_t p) const noexcept { return static_cast<int>(p / nphi_); }
  int angle_of(std::size_t p) const noexcept { return static_cast<int>(p % nphi_); }

  /// Cell measures for dsigma = sin^{n-1}(rho) drho domega; rows sum to the exact cap area.
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  /// |S^{n-1}| * int_0^theta sin^{n-1}.
  double total_measure() const noexcept { return total_measure_; }

  const Stencils& stencils(BoundaryClosure closure) const noexcept {
    return closure == BoundaryClosure::robin ? robin_ : extrapolated_;
  }

  /// Ghost-ring weights for rings Nr-1, Nr-2, ... under the given closure.
  std::span<const double> ghost_weights(BoundaryClosure closure) const noexcept;

  bool same_grid(const CapDomain& other) const noexcept;
  std::string describe() const;

 private:
  CapDomain() = default;
  void build_stencils(BoundaryClosure closure, Stencils& out) const;

  int n_ = 2;
  double theta_ = 0.0;
  GridMode mode_ = GridMode::axisym;
  int nr_ = 0;
  int nphi_ = 1;
  double h_ = 0.0;
  double dphi_ = 0.0;
  Eigen::VectorXd weights_;
  double total_measure_ = 0.0;
  std::vector<double> robin_ghost_;
  std::vector<double> extrap_ghost_;
  Stencils robin_;
  Stencils extrapolated_;
};

/// Values of a scalar function at the nodes of a domain.
///
/// The capillary flag records the claim f_rho = cot(theta) f at rho = theta; operators use the
/// Robin closure for flagged fields and extrapolation otherwise.
class ScalarField {
 public:
  ScalarField(DomainPtr domain, Eigen::VectorXd values, bool capillary = false);

  const CapDomain& domain() const noexcept { return *domain_; }
  const DomainPtr& domain_ptr() const noexcept { return domain_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  double operator[](std::size_t p) const noexcept { return values_[static_cast<Eigen::Index>(p)]; }
  double at(int j, int i) const noexcept { return (*this)[domain_->index(j, i)]; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  bool capillary() const noexcept { return capillary_; }
  BoundaryClosure closure() const noexcept {
    return capillary_ ? BoundaryClosure::robin : BoundaryClosure::extrapolate;
  }
  ScalarField with_values(Eigen::VectorXd values) const;
  ScalarField with_capillary(bool flag) const;

 private:
  DomainPtr domain_;
  Eigen::VectorXd values_;
  bool capillary_ = false;
};

/// Frame components of a tangent vector field; column c is component c.
struct FrameVectorField {
  DomainPtr domain;
  Eigen::MatrixXd components;  // size() x n
};

/// Per-node symmetric n x n matrices in the orthonormal frame.
class SymTensorField {
 public:
  SymTensorField(DomainPtr domain, std::vector<Eigen::MatrixXd> matrices);

  const CapDomain& domain() const noexcept { return *domain_; }
  const DomainPtr& domain_ptr() const noexcept { return domain_; }
  std::size_t size() const noexcept { return matrices_.size(); }
  const Eigen::MatrixXd& operator[](std::size_t p) const noexcept { return matrices_[p]; }
  const std::vector<Eigen::MatrixXd>& matrices() const noexcept { return matrices_; }

  /// Ascending eigenvalues per node, computed on first use.
  const std::vector<Eigen::VectorXd>& eigenvalues() const;

 private:
  DomainPtr domain_;
  std::vector<Eigen::MatrixXd> matrices_;
  struct EigenCache {
    std::once_flag flag;
    std::vector<Eigen::VectorXd> values;
  };
  std::shared_ptr<EigenCache> cache_;
};

/// Values on the boundary circle rho = theta, one per angular index.
struct BoundaryTrace {
  DomainPtr domain;
  Eigen::VectorXd values;
  double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

/// zeta = (sin(rho) omega, cos(rho) - cos(theta)).
Eigen::VectorXd polar_to_ambient(const CapDomain& domain, double rho, std::span<const double> omega);

/// Unit vector omega in S^{n-1} for angular index i (omega = E_1 in axisymmetric mode).
Eigen::VectorXd omega_at(const CapDomain& domain, int i);

/// Midpoint quadrature of f against dsigma.
double quadrature(const CapDomain& domain, const ScalarField& f);
double quadrature(const ScalarField& f);
double quadrature(const CapDomain& domain, const Eigen::VectorXd& values);

/// The horizontal coordinate function zeta_i = <zeta, E_i> (full2d, i in {0, 1}).
ScalarField horizontal_coordinate(const DomainPtr& domain, int i);

FrameVectorField gradient(const ScalarField& f);
FrameVectorField gradient(const ScalarField& f, BoundaryClosure closure);

SymTensorField covariant_hessian(const ScalarField& f);
SymTensorField covariant_hessian(const ScalarField& f, BoundaryClosure closure);

/// f_rho - cot(theta) f at rho = theta from one-sided cubic interpolation of the last rings.
BoundaryTrace robin_residual(const ScalarField& f);

/// Value and radial derivative at rho = theta, one-sided from the last four rings.
struct BoundaryJet {
  Eigen::VectorXd value;
  Eigen::VectorXd d_rho;
};
BoundaryJet boundary_jet(const ScalarField& f);

/// Field rotated by pi about the vertical axis: g(rho, phi) = f(rho, phi + pi).
ScalarField rotate_half_turn(const ScalarField& f);

namespace detail {
/// Finite-difference weights (Fornberg) for derivative orders 0..max_order at x0.
std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes, int max_order);
}  // namespace detail

}  // namespace capcm

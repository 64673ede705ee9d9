#pragma once

// Closed-form functions on the cap with exact frame derivatives.  They back the manufactured
// solutions and serve as the symbolic oracle the finite-difference operators are tested against.

#include "capcm/cap_domain.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace capcm {

/// Radial profile with its first two derivatives: {f, f', f''} at rho.
using RadialProfile = std::function<std::array<double, 3>(double rho)>;

/// sin^p(rho) * exp(beta * cos(rho)).
RadialProfile sin_exp_profile(int p, double beta);
/// cos(rho).
RadialProfile cos_profile();
/// exp(-(rho / width)^2).
RadialProfile gaussian_profile(double width);

/// Finite sum of terms coef * f(rho) * trig(m phi), trig in {cos, sin}.
class AnalyticField {
 public:
  struct Term {
    double coef = 1.0;
    RadialProfile profile;
    int m = 0;
    bool sine = false;
  };

  AnalyticField() = default;
  explicit AnalyticField(std::vector<Term> terms) : terms_(std::move(terms)) {}

  static AnalyticField constant(double c);
  /// 1 - cos(theta) cos(rho), the support function of the unit cap.
  static AnalyticField ell(double theta);
  /// zeta_c = sin(rho) cos(phi) (c = 0) or sin(rho) sin(phi) (c = 1).
  static AnalyticField zeta(int c);
  static AnalyticField cos_rho();
  /// exp(-a cos rho), a = cos(theta) / sin^2(theta).
  static AnalyticField g_axi(double theta);
  /// sin^2(rho) exp(a cos rho) cos(2 phi).
  static AnalyticField g2(double theta);
  /// sin^3(rho) exp(2 a cos rho) cos(3 phi).
  static AnalyticField g3(double theta);

  AnalyticField operator+(const AnalyticField& o) const;
  AnalyticField operator*(double c) const;
  friend AnalyticField operator*(double c, const AnalyticField& f) { return f * c; }

  /// True when every term is rotationally symmetric.
  bool axisymmetric() const;
  const std::vector<Term>& terms() const noexcept { return terms_; }

  double value(double rho, double phi) const;
  /// Frame components (e_rho, e_phi, ...) in dimension n.
  Eigen::VectorXd gradient(double rho, double phi, int n) const;
  /// Frame components of the covariant Hessian in dimension n.
  Eigen::MatrixXd hessian(double rho, double phi, int n) const;
  /// hessian + value * identity.
  Eigen::MatrixXd tau(double rho, double phi, int n) const;

  /// Samples onto the nodes of a domain.
  ScalarField sample(const DomainPtr& domain, bool capillary = true) const;

 private:
  std::vector<Term> terms_;
};

}  // namespace capcm

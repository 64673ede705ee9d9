#pragma once

// Integral identities, inequalities and a priori bounds as numerical checks, plus the
// manufactured-solution factory.

#include "capcm/analytic.hpp"
#include "capcm/cap_domain.hpp"
#include "capcm/check_report.hpp"

#include <string>

namespace capcm {

/// int sigma_k(tau[s]) zeta_i dsigma for i = 1..n (zero by symmetry on axisymmetric grids).
Eigen::VectorXd divergence_identity(const ScalarField& s, int k);

struct MinkowskiIdentity {
  double i1 = 0.0;  ///< int s sigma_{k-1}(tau[s])
  double i2 = 0.0;  ///< int ell sigma_k(tau[s])
  double ratio = 0.0;
  double expected = 0.0;  ///< binom(n, k-1) / binom(n, k)
};

MinkowskiIdentity minkowski_identity(const ScalarField& s, int k);

struct AfMargin {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  ///< lhs - rhs
  double scale = 1.0;   ///< max(|lhs|, |rhs|)
};

/// int s2 sigma_k(tau[s1]) - (int s1 sigma_k(tau[s1]))^{k/(k+1)} (int s2 sigma_k(tau[s2]))^{1/(k+1)}.
AfMargin af_inequality(const ScalarField& s1, const ScalarField& s2, int k);

/// max |grad s| <= max s / sin(theta) + h.
CheckReport gradient_bound(const ScalarField& s);

/// min lambda_min(tau[s]) and its node; passes iff >= floor.
CheckReport convexity_monitor(const ScalarField& s, double floor = 1e-8);

/// max sigma_1(tau[s]).
double sigma1_max(const ScalarField& s);

/// Compares max sigma_1 on two resolutions; passes iff the ratio (larger / smaller) <= 1.2.
CheckReport sigma1_monitor(const ScalarField& coarse, const ScalarField& fine);

/// Analytic ell + eps * g with g in {g_axi, g2, g3}.
AnalyticField manufactured_analytic(const std::string& name, double eps, double theta);

/// Samples ell + eps * g onto the domain.  Throws HypothesisError when tau loses positive
/// definiteness, quoting an estimate of the largest admissible eps.
ScalarField manufactured_family(const std::string& name, double eps, const DomainPtr& domain);

/// Largest |eps| with the sign of `sign` (bisection on [0, 64]) keeping the exact
/// tau[ell + eps g] positive definite at the nodes.
double max_admissible_eps(const std::string& name, const DomainPtr& domain, double sign = 1.0);

struct TranslationFit {
  Eigen::VectorXd b;
  double residual = 0.0;  ///< max |diff - <zeta, b>|
};

/// Weighted least-squares fit diff ~ <zeta, b> over the horizontal coordinates (full2d).
TranslationFit fit_translation(const ScalarField& diff);

}  // namespace capcm

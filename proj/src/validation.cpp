#include "capcm/validation.hpp"

#include "capcm/continuation.hpp"
#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"
#include "capcm/support_geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace capcm {

namespace {

Eigen::VectorXd sigma_values(const ScalarField& s, int k) {
  if (k == 0) return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.size()));
  return sigma_k_field(tau(s), k).values();
}

Eigen::MatrixXd horizontal(const CapDomain& d) {
  const auto N = static_cast<Eigen::Index>(d.size());
  Eigen::MatrixXd Z(N, 2);
  for (Eigen::Index p = 0; p < N; ++p) {
    const auto up = static_cast<std::size_t>(p);
    const double sr = std::sin(d.rho(d.ring_of(up))), ph = d.phi(d.angle_of(up));
    Z(p, 0) = sr * std::cos(ph);
    Z(p, 1) = sr * std::sin(ph);
  }
  return Z;
}

}  // namespace

Eigen::VectorXd divergence_identity(const ScalarField& s, int k) {
  const auto& d = s.domain();
  if (d.mode() != GridMode::full2d) return Eigen::VectorXd::Zero(d.dim());
  const Eigen::VectorXd sk = sigma_values(s, k);
  return horizontal(d).transpose() * d.weights().cwiseProduct(sk);
}

MinkowskiIdentity minkowski_identity(const ScalarField& s, int k) {
  const auto& d = s.domain();
  if (k < 1 || k > d.dim()) throw InvalidArgument("order k must satisfy 1 <= k <= n");
  MinkowskiIdentity out;
  const Eigen::VectorXd& w = d.weights();
  out.i1 = w.dot(s.values().cwiseProduct(sigma_values(s, k - 1)));
  out.i2 = w.dot(ell(s.domain_ptr()).values().cwiseProduct(sigma_values(s, k)));
  out.ratio = out.i1 / out.i2;
  out.expected = binomial(d.dim(), k - 1) / binomial(d.dim(), k);
  return out;
}

AfMargin af_inequality(const ScalarField& s1, const ScalarField& s2, int k) {
  if (!s1.domain().same_grid(s2.domain())) throw InvalidArgument("fields live on different grids");
  const Eigen::VectorXd& w = s1.domain().weights();
  const Eigen::VectorXd k1 = sigma_values(s1, k), k2 = sigma_values(s2, k);
  const double a21 = w.dot(s2.values().cwiseProduct(k1));
  const double a11 = w.dot(s1.values().cwiseProduct(k1));
  const double a22 = w.dot(s2.values().cwiseProduct(k2));
  AfMargin out;
  out.lhs = a21;
  out.rhs = std::pow(a11, k / (k + 1.0)) * std::pow(a22, 1.0 / (k + 1.0));
  out.margin = out.lhs - out.rhs;
  out.scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  return out;
}

CheckReport gradient_bound(const ScalarField& s) {
  const auto& d = s.domain();
  const auto g = gradient(s);
  const double gmax = g.components.rowwise().norm().maxCoeff();
  const double bound = s.values().maxCoeff() / std::sin(d.theta());
  CheckReport r;
  r.name = "gradient_bound";
  r.values = {gmax, bound};
  r.tolerance = d.h();
  r.pass = gmax <= bound + d.h();
  r.grid = d.describe();
  r.note = "max |grad s| <= max s / sin(theta) + h";
  return r;
}

CheckReport convexity_monitor(const ScalarField& s, double floor) {
  const auto& d = s.domain();
  const Eigen::VectorXd lam = lambda_min_field(tau(s)).values();
  Eigen::Index at = 0;
  const double m = lam.minCoeff(&at);
  CheckReport r;
  r.name = "convexity_monitor";
  r.values = {m};
  r.tolerance = floor;
  r.pass = m >= floor;
  r.grid = d.describe();
  std::ostringstream os;
  os << "min lambda_min(tau) at j=" << d.ring_of(static_cast<std::size_t>(at))
     << " i=" << d.angle_of(static_cast<std::size_t>(at));
  r.note = os.str();
  return r;
}

double sigma1_max(const ScalarField& s) { return sigma_values(s, 1).maxCoeff(); }

CheckReport sigma1_monitor(const ScalarField& coarse, const ScalarField& fine) {
  const double a = sigma1_max(coarse), b = sigma1_max(fine);
  const double ratio = std::max(a, b) / std::min(a, b);
  CheckReport r;
  r.name = "sigma1_monitor";
  r.values = {a, b, ratio};
  r.tolerance = 1.2;
  r.pass = std::isfinite(ratio) && ratio <= 1.2;
  r.grid = coarse.domain().describe() + " / " + fine.domain().describe();
  r.note = "max sigma_1 across refinement";
  return r;
}

AnalyticField manufactured_analytic(const std::string& name, double eps, double theta) {
  AnalyticField g;
  if (name == "g_axi") g = AnalyticField::g_axi(theta);
  else if (name == "g2") g = AnalyticField::g2(theta);
  else if (name == "g3") g = AnalyticField::g3(theta);
  else throw InvalidArgument("unknown manufactured family '" + name + "' (g_axi, g2, g3)");
  return AnalyticField::ell(theta) + eps * g;
}

namespace {

bool exact_positive(const AnalyticField& f, const CapDomain& d) {
  for (int j = 0; j < d.nr(); ++j)
    for (int i = 0; i < d.nphi(); ++i) {
      const Eigen::MatrixXd T = f.tau(d.rho(j), d.phi(i), d.dim());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues()[0] > 0.0)) return false;
    }
  return true;
}

}  // namespace

double max_admissible_eps(const std::string& name, const DomainPtr& domain, double sign) {
  const double theta = domain->theta();
  const double sg = sign < 0 ? -1.0 : 1.0;
  double lo = 0.0, hi = 64.0;
  if (exact_positive(manufactured_analytic(name, sg * hi, theta), *domain)) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (exact_positive(manufactured_analytic(name, sg * mid, theta), *domain)) lo = mid;
    else hi = mid;
  }
  return lo;
}

ScalarField manufactured_family(const std::string& name, double eps, const DomainPtr& domain) {
  const auto& d = *domain;
  if ((name == "g2" || name == "g3") && d.mode() != GridMode::full2d)
    throw InvalidArgument("family '" + name + "' is angular and needs a full2d domain");
  const auto f = manufactured_analytic(name, eps, d.theta());
  if (!exact_positive(f, d)) {
    const double limit = max_admissible_eps(name, domain, eps);
    std::ostringstream os;
    os << "manufactured family " << name << ": eps = " << eps
       << " makes tau[ell + eps g] lose positive definiteness (max admissible |eps| ~ " << limit << ")";
    throw HypothesisError(os.str());
  }
  return f.sample(domain, true);
}

TranslationFit fit_translation(const ScalarField& diff) {
  const auto& d = diff.domain();
  if (d.mode() != GridMode::full2d) throw InvalidArgument("fit_translation needs a full2d domain");
  const Eigen::MatrixXd Z = horizontal(d);
  const Eigen::VectorXd& w = d.weights();
  const Eigen::Matrix2d G = Z.transpose() * w.asDiagonal() * Z;
  const Eigen::Vector2d rhs = Z.transpose() * w.cwiseProduct(diff.values());
  TranslationFit out;
  out.b = G.ldlt().solve(rhs);
  out.residual = (diff.values() - Z * out.b).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace capcm

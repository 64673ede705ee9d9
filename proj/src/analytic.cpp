#include "capcm/analytic.hpp"

#include "capcm/error.hpp"

#include <cmath>

namespace capcm {

RadialProfile sin_exp_profile(int p, double beta) {
  return [p, beta](double r) -> std::array<double, 3> {
    const double s = std::sin(r), c = std::cos(r);
    const double e = std::exp(beta * c);
    const double e1 = -beta * s * e;
    const double e2 = (-beta * c + beta * beta * s * s) * e;
    const double P = std::pow(s, p);
    const double P1 = p >= 1 ? p * std::pow(s, p - 1) * c : 0.0;
    const double P2 = (p >= 2 ? p * (p - 1.0) * std::pow(s, p - 2) * c * c : 0.0) - p * P;
    return {P * e, P1 * e + P * e1, P2 * e + 2.0 * P1 * e1 + P * e2};
  };
}

RadialProfile cos_profile() {
  return [](double r) -> std::array<double, 3> { return {std::cos(r), -std::sin(r), -std::cos(r)}; };
}

RadialProfile gaussian_profile(double width) {
  const double w2 = width * width;
  return [w2](double r) -> std::array<double, 3> {
    const double f = std::exp(-r * r / w2);
    return {f, -2.0 * r / w2 * f, (-2.0 / w2 + 4.0 * r * r / (w2 * w2)) * f};
  };
}

AnalyticField AnalyticField::constant(double c) { return AnalyticField({{c, sin_exp_profile(0, 0.0), 0, false}}); }

AnalyticField AnalyticField::ell(double theta) {
  return constant(1.0) + AnalyticField({{-std::cos(theta), cos_profile(), 0, false}});
}

AnalyticField AnalyticField::zeta(int c) { return AnalyticField({{1.0, sin_exp_profile(1, 0.0), 1, c == 1}}); }

AnalyticField AnalyticField::cos_rho() { return AnalyticField({{1.0, cos_profile(), 0, false}}); }

namespace {
double capillary_rate(double theta) {
  const double s = std::sin(theta);
  return std::cos(theta) / (s * s);
}
}  // namespace

AnalyticField AnalyticField::g_axi(double theta) {
  return AnalyticField({{1.0, sin_exp_profile(0, -capillary_rate(theta)), 0, false}});
}

AnalyticField AnalyticField::g2(double theta) {
  return AnalyticField({{1.0, sin_exp_profile(2, capillary_rate(theta)), 2, false}});
}

AnalyticField AnalyticField::g3(double theta) {
  return AnalyticField({{1.0, sin_exp_profile(3, 2.0 * capillary_rate(theta)), 3, false}});
}

AnalyticField AnalyticField::operator+(const AnalyticField& o) const {
  auto t = terms_;
  t.insert(t.end(), o.terms_.begin(), o.terms_.end());
  return AnalyticField(std::move(t));
}

AnalyticField AnalyticField::operator*(double c) const {
  auto t = terms_;
  for (auto& term : t) term.coef *= c;
  return AnalyticField(std::move(t));
}

bool AnalyticField::axisymmetric() const {
  for (const auto& t : terms_)
    if (t.m != 0 && t.coef != 0.0) return false;
  return true;
}

namespace {
struct AngularJet {
  double a, a1, a2;  // trig(m phi) and its phi-derivatives
};
AngularJet angular(const AnalyticField::Term& t, double phi) {
  const double m = t.m;
  if (t.m == 0) return {t.sine ? 0.0 : 1.0, 0.0, 0.0};
  const double c = std::cos(m * phi), s = std::sin(m * phi);
  if (t.sine) return {s, m * c, -m * m * s};
  return {c, -m * s, -m * m * c};
}
}  // namespace

double AnalyticField::value(double rho, double phi) const {
  double v = 0.0;
  for (const auto& t : terms_) v += t.coef * t.profile(rho)[0] * angular(t, phi).a;
  return v;
}

Eigen::VectorXd AnalyticField::gradient(double rho, double phi, int n) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  const double sr = std::sin(rho);
  for (const auto& t : terms_) {
    const auto f = t.profile(rho);
    const auto a = angular(t, phi);
    g[0] += t.coef * f[1] * a.a;
    if (n >= 2) g[1] += t.coef * f[0] * a.a1 / sr;
  }
  return g;
}

Eigen::MatrixXd AnalyticField::hessian(double rho, double phi, int n) const {
  if (n > 2 && !axisymmetric()) throw InvalidArgument("non-axisymmetric analytic fields need n = 2");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  const double sr = std::sin(rho);
  const double cot = std::cos(rho) / sr;
  for (const auto& t : terms_) {
    const auto f = t.profile(rho);
    const auto a = angular(t, phi);
    const double k = t.coef;
    H(0, 0) += k * f[2] * a.a;
    const double tangential = k * (f[0] * a.a2 / (sr * sr) + cot * f[1] * a.a);
    for (int c = 1; c < n; ++c) H(c, c) += tangential;
    if (n == 2) {
      const double mixed = k * (f[1] * a.a1 - cot * f[0] * a.a1) / sr;
      H(0, 1) += mixed;
      H(1, 0) += mixed;
    }
  }
  return H;
}

Eigen::MatrixXd AnalyticField::tau(double rho, double phi, int n) const {
  return hessian(rho, phi, n) + value(rho, phi) * Eigen::MatrixXd::Identity(n, n);
}

ScalarField AnalyticField::sample(const DomainPtr& domain, bool capillary) const {
  if (domain->mode() == GridMode::axisym && !axisymmetric())
    throw InvalidArgument("cannot sample a non-axisymmetric function on an axisymmetric domain");
  Eigen::VectorXd v(static_cast<Eigen::Index>(domain->size()));
  for (int j = 0; j < domain->nr(); ++j)
    for (int i = 0; i < domain->nphi(); ++i)
      v[static_cast<Eigen::Index>(domain->index(j, i))] = value(domain->rho(j), domain->phi(i));
  return ScalarField(domain, std::move(v), capillary);
}

}  // namespace capcm

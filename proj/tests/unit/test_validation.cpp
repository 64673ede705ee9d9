#include <doctest.h>

#include "capcm/error.hpp"
#include "capcm/support_geometry.hpp"
#include "capcm/validation.hpp"
#include "oracles.hpp"

#include <cmath>
#include <functional>

using namespace capcm;

namespace {

const double kTheta = M_PI / 3;
const double kA = std::cos(kTheta) / (std::sin(kTheta) * std::sin(kTheta));

ScalarField sample(const DomainPtr& d, const std::function<double(double, double)>& f, bool capillary = true) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d->size()));
  for (std::size_t p = 0; p < d->size(); ++p)
    v[static_cast<Eigen::Index>(p)] = f(d->rho(d->ring_of(p)), d->phi(d->angle_of(p)));
  return ScalarField(d, v, capillary);
}

double ell_fn(double r) { return 1.0 - std::cos(kTheta) * std::cos(r); }
double g_axi(double r) { return std::exp(-kA * std::cos(r)); }
double g2(double r, double p) { return std::pow(std::sin(r), 2) * std::exp(kA * std::cos(r)) * std::cos(2 * p); }
double g3(double r, double p) { return std::pow(std::sin(r), 3) * std::exp(2 * kA * std::cos(r)) * std::cos(3 * p); }

}  // namespace

TEST_CASE("divergence identity") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 50, 100);
  CHECK(divergence_identity(ell(d), 2).cwiseAbs().maxCoeff() < 1e-10);
  std::vector<double> v;
  for (int nr : {25, 50, 100}) {
    auto dd = CapDomain::build(2, kTheta, GridMode::full2d, nr, 2 * nr);
    auto s = sample(dd, [](double r, double p) { return ell_fn(r) + 0.1 * g2(r, p) + 0.05 * g3(r, p - 0.2); });
    v.push_back(divergence_identity(s, 2).cwiseAbs().maxCoeff());
  }
  CHECK(v[0] / v[1] > 3.0);
  CHECK(v[1] / v[2] > 3.0);
  // cos(rho) with a tilt is not capillary: the identity fails at O(1)
  auto bad = sample(d, [](double r, double p) { return std::cos(r) + 0.2 * std::sin(r) * std::cos(r) * std::cos(p); }, false);
  CHECK(divergence_identity(bad, 1).cwiseAbs().maxCoeff() > 1e-3);
  auto a = CapDomain::build(3, kTheta, GridMode::axisym, 20);
  CHECK(divergence_identity(ell(a), 2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("minkowski identity") {
  for (int n : {2, 3, 4})
    for (int k = 1; k <= n; ++k) {
      auto d = CapDomain::build(n, kTheta, GridMode::axisym, 100);
      auto m = minkowski_identity(ell(d), k);
      CHECK(m.expected == doctest::Approx(oracle::binom(n, k - 1) / oracle::binom(n, k)));
      CHECK(std::abs(m.ratio - m.expected) < 1e-3);
    }
  auto d = CapDomain::build(3, kTheta, GridMode::axisym, 100);
  CHECK(minkowski_identity(ell(d), 1).expected == doctest::Approx(1.0 / 3.0));
  auto f = CapDomain::build(2, kTheta, GridMode::full2d, 100, 200);
  auto s = sample(f, [](double r, double p) { return ell_fn(r) + 0.05 * g2(r, p); });
  auto m = minkowski_identity(s, 2);
  CHECK(std::abs(m.ratio - 2.0) < 5e-3);
  CHECK(m.i1 == doctest::Approx(m.ratio * m.i2));
}

TEST_CASE("AF inequality") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 48, 96);
  auto l = ell(d);
  for (int k : {1, 2}) {
    auto eq = af_inequality(l, l, k);
    CHECK(std::abs(eq.margin) <= 1e-12 * eq.scale);
    auto two = sample(d, [](double r, double) { return 2 * ell_fn(r); });
    auto hom = af_inequality(l, two, k);
    CHECK(std::abs(hom.margin) <= 1e-8 * hom.scale);
    auto pert = sample(d, [](double r, double p) { return ell_fn(r) + 0.2 * g2(r, p); });
    auto m = af_inequality(l, pert, k);
    CHECK(m.margin > 1e-6 * m.scale);
    // direct quadrature of the left side
    CHECK(m.lhs > 0.0);
  }
}

TEST_CASE("gradient bound") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 50, 100);
  auto c = gradient_bound(ell(d));
  CHECK(c.pass);
  REQUIRE(c.values.size() == 2);
  CHECK(c.values[0] == doctest::Approx(std::cos(kTheta) * std::sin(kTheta)).epsilon(1e-2));
  CHECK(c.values[1] == doctest::Approx(0.75 / std::sin(kTheta)).epsilon(1e-2));
  auto c3 = gradient_bound(sample(d, [](double r, double) { return 3 * ell_fn(r); }));
  CHECK(c3.values[0] == doctest::Approx(3 * c.values[0]));
  CHECK(c3.values[1] == doctest::Approx(3 * c.values[1]));
}

TEST_CASE("convexity monitor") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 50, 100);
  auto c = convexity_monitor(ell(d));
  CHECK(c.pass);
  CHECK(c.values[0] == doctest::Approx(1.0).epsilon(1e-3));
  auto z = convexity_monitor(sample(d, [](double r, double p) { return std::sin(r) * std::cos(p); }));
  CHECK_FALSE(z.pass);
  CHECK(std::abs(z.values[0]) < d->h() * d->h());
  auto bump = sample(d, [](double r, double) { return ell_fn(r) - 0.5 * std::exp(-std::pow(r / 0.2, 2)); });
  auto b = convexity_monitor(bump);
  CHECK_FALSE(b.pass);
  CHECK(b.values[0] < -0.1);
}

TEST_CASE("sigma_1 monitor") {
  for (int n : {2, 3}) {
    auto d = CapDomain::build(n, kTheta, GridMode::axisym, 100);
    CHECK(sigma1_max(ell(d)) == doctest::Approx(n).epsilon(1e-3));
  }
  auto c = CapDomain::build(3, kTheta, GridMode::axisym, 100);
  auto f = CapDomain::build(3, kTheta, GridMode::axisym, 200);
  auto s = [](double r, double) { return ell_fn(r) + 0.1 * g_axi(r); };
  auto rep = sigma1_monitor(sample(c, s), sample(f, s));
  CHECK(rep.pass);
  CHECK(rep.values.back() <= 1.2);
}

TEST_CASE("manufactured family members are capillary") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 64, 128);
  for (const char* name : {"g_axi", "g2", "g3"}) {
    auto s = manufactured_family(name, 0.05, d);
    CHECK(robin_residual(s).max_abs() < 1e-4);
    auto g = sample(d, [&](double r, double p) {
      const std::string nm = name;
      return nm == "g_axi" ? g_axi(r) : nm == "g2" ? g2(r, p) : g3(r, p);
    });
    CHECK(robin_residual(g).max_abs() < 1e-3);
    auto d2 = CapDomain::build(2, kTheta, GridMode::full2d, 128, 256);
    auto gf = sample(d2, [&](double r, double p) {
      const std::string nm = name;
      return nm == "g_axi" ? g_axi(r) : nm == "g2" ? g2(r, p) : g3(r, p);
    });
    CHECK(robin_residual(g).max_abs() / robin_residual(gf).max_abs() > 3.5);
    CHECK((s.values() - (ell(d).values() + 0.05 * g.values())).cwiseAbs().maxCoeff() < 1e-14);
  }
  // mode-3 data is orthogonal to the horizontal coordinates
  auto s3 = sample(d, [](double r, double p) { return std::pow(ell_fn(r) + 0.05 * g3(r, p), -2.0); });
  for (int c : {0, 1}) {
    double acc = 0.0;
    for (std::size_t p = 0; p < d->size(); ++p) {
      const double r = d->rho(d->ring_of(p)), ph = d->phi(d->angle_of(p));
      acc += d->weights()[static_cast<Eigen::Index>(p)] * s3[p] * std::sin(r) * (c ? std::sin(ph) : std::cos(ph));
    }
    CHECK(std::abs(acc) < 1e-12);
  }
}

TEST_CASE("manufactured family rejects large amplitudes") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 32, 64);
  const double emax = max_admissible_eps("g2", d);
  CHECK(emax > 0.05);
  CHECK(emax < 64.0);
  CHECK_NOTHROW(manufactured_family("g2", 0.9 * emax, d));
  CHECK_THROWS_AS(manufactured_family("g2", 1.1 * emax, d), HypothesisError);
  auto a = CapDomain::build(3, kTheta, GridMode::axisym, 32);
  CHECK_THROWS_AS(manufactured_family("g2", 0.05, a), InvalidArgument);
  CHECK_THROWS_AS(manufactured_family("nope", 0.05, d), InvalidArgument);
}

TEST_CASE("fit translation") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 24, 48);
  auto diff = sample(d, [](double r, double p) { return std::sin(r) * (0.3 * std::cos(p) - 0.1 * std::sin(p)); });
  auto fit = fit_translation(diff);
  CHECK(fit.b[0] == doctest::Approx(0.3));
  CHECK(fit.b[1] == doctest::Approx(-0.1));
  CHECK(fit.residual < 1e-14);
  auto other = sample(d, [](double r, double p) { return 0.01 * g2(r, p); });
  CHECK(fit_translation(other).residual > 1e-3);
}

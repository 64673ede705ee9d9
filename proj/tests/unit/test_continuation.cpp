#include <doctest.h>

#include "capcm/continuation.hpp"
#include "capcm/error.hpp"
#include "capcm/support_geometry.hpp"
#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <random>

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

Eigen::VectorXd zeta_col(const CapDomain& d, int c) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(d.size()));
  for (std::size_t p = 0; p < d.size(); ++p) {
    const double r = d.rho(d.ring_of(p)), ph = d.phi(d.angle_of(p));
    z[static_cast<Eigen::Index>(p)] = std::sin(r) * (c == 0 ? std::cos(ph) : std::sin(ph));
  }
  return z;
}

}  // namespace

TEST_CASE("residual of caps") {
  double prev = 0.0;
  for (int nr : {50, 100}) {
    auto d = CapDomain::build(3, kTheta, GridMode::axisym, nr);
    auto l = ell(d);
    const auto n3 = [&](double c) { return ScalarField(d, Eigen::VectorXd::Constant(nr, c)); };
    const double e = residual(l, n3(3.0), 2).values().cwiseAbs().maxCoeff();
    CHECK(e < 1e-3);
    if (prev > 0.0) CHECK(prev / e > 3.5);
    prev = e;
    auto r2 = sample(d, [](double r, double) { return 1.5 * ell_fn(r); });
    CHECK(residual(r2, n3(3.0 * 1.5 * 1.5), 2).values().cwiseAbs().maxCoeff() < 3e-3);
    CHECK((residual(l, n3(4.0), 2).values().array() + 1.0).abs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("forward examples") {
  auto d = CapDomain::build(3, kTheta, GridMode::axisym, 100);
  auto two = sample(d, [](double r, double) { return 2 * ell_fn(r); });
  CHECK((forward(two, 2).values().array() - 12.0).abs().maxCoeff() < 1e-3);
  auto f = CapDomain::build(2, kTheta, GridMode::full2d, 48, 96);
  auto base = sample(f, [](double r, double p) { return ell_fn(r) + 0.05 * g2(r, p); });
  auto moved = sample(f, [](double r, double p) { return ell_fn(r) + 0.05 * g2(r, p) + 0.2 * std::sin(r) * std::sin(p); });
  for (int k : {1, 2}) {
    const double e = (forward(base, k).values() - forward(moved, k).values()).cwiseAbs().maxCoeff();
    CHECK(e < 1e-3);
  }
  CHECK((forward(ell(f), 2).values().array() - 1.0).abs().maxCoeff() < 1e-3);
}

TEST_CASE("jacobian matches directional differences on 20 seeded pairs") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const bool full = trial % 2 == 0;
    const int n = full ? 2 : 3 + trial % 3;
    const int k = 1 + trial % n;
    auto d = full ? CapDomain::build(2, kTheta, GridMode::full2d, 12, 24) : CapDomain::build(n, kTheta, GridMode::axisym, 30);
    const double e1 = 0.05 * u(rng), e2 = 0.03 * u(rng), e3 = 0.02 * u(rng);
    auto s = sample(d, [&](double r, double p) {
      double v = ell_fn(r) + e1 * g_axi(r);
      if (full) v += e2 * g2(r, p) + e3 * g3(r, p);
      return v;
    });
    Eigen::VectorXd ups(static_cast<Eigen::Index>(d->size()));
    for (auto& x : ups) x = u(rng);
    ScalarField phi(d, Eigen::VectorXd::Constant(ups.size(), 1.0));
    const auto J = assemble_jacobian(s, k);
    const Eigen::VectorXd Lv = J * ups;
    const double eps = 1e-6 * s.values().cwiseAbs().maxCoeff();
    const Eigen::VectorXd fd =
        (residual(s.with_values(s.values() + eps * ups), phi, k).values() -
         residual(s.with_values(s.values() - eps * ups), phi, k).values()) / (2 * eps);
    CHECK((fd - Lv).norm() / Lv.norm() <= 1e-5);
  }
}

TEST_CASE("k = 1 linearization at the cap is Laplacian plus n") {
  for (int n : {2, 3, 4}) {
    double prev = 0.0;
    for (int nr : {50, 100}) {
      auto d = CapDomain::build(n, kTheta, GridMode::axisym, nr);
      const auto J = assemble_jacobian(ell(d), 1);
      Eigen::VectorXd v(nr), ref(nr);
      for (int j = 0; j < nr; ++j) {
        const double r = d->rho(j), g = g_axi(r);
        const double g1 = kA * std::sin(r) * g, gg = (kA * std::cos(r) + kA * kA * std::sin(r) * std::sin(r)) * g;
        v[j] = g;
        ref[j] = gg + (n - 1) * std::cos(r) / std::sin(r) * g1 + n * g;
      }
      const double e = (J * v - ref).cwiseAbs().maxCoeff();
      if (prev > 0.0) CHECK(prev / e > 3.5);
      prev = e;
    }
  }
}

TEST_CASE("kernel action of the linearization is O(h^2)") {
  std::vector<double> err;
  for (int nr : {16, 32, 64}) {
    auto d = CapDomain::build(2, kTheta, GridMode::full2d, nr, 2 * nr);
    auto s = sample(d, [](double r, double p) { return ell_fn(r) + 0.05 * g2(r, p) + 0.02 * g3(r, p); });
    const auto J = assemble_jacobian(s, 2);
    double e = 0.0;
    for (int c : {0, 1}) e = std::max(e, (J * zeta_col(*d, c)).cwiseAbs().maxCoeff());
    err.push_back(e);
    CHECK(e <= 2.0 * d->h() * d->h());
  }
  CHECK(err[0] / err[1] > 3.0);
  CHECK(err[1] / err[2] > 3.0);
}

TEST_CASE("jacobian rejects non-elliptic states") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 12, 24);
  auto bad = sample(d, [](double r, double) { return -ell_fn(r); });
  CHECK_THROWS_AS(assemble_jacobian(bad, 2), EllipticityError);
  CHECK_NOTHROW(assemble_jacobian(bad, 2, false));
}

TEST_CASE("bordered system agrees with a dense full-pivot solve") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 6, 12);
  const auto J = assemble_jacobian(ell(d), 2);
  const auto bs = kernel_augmentation(J, *d);
  const Eigen::Index N = static_cast<Eigen::Index>(d->size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + 2, N + 2);
  A.topLeftCorner(N, N) = Eigen::MatrixXd(J);
  const Eigen::VectorXd& w = d->weights();
  for (int c : {0, 1}) {
    const Eigen::VectorXd z = zeta_col(*d, c);
    A.block(0, N + c, N, 1) = z;
    A.block(N + c, 0, 1, N) = (w.array() * z.array()).matrix().transpose() / (w.array() * z.array().square()).sum();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  CHECK(lu.rank() == N + 2);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 2);
  for (Eigen::Index p = 0; p < N; ++p) rhs[p] = g(rng);
  const Eigen::VectorXd x_ref = lu.solve(rhs);
  const Eigen::VectorXd x = bs.solve(rhs);
  CHECK((x - x_ref).cwiseAbs().maxCoeff() <= 1e-9 * x_ref.cwiseAbs().maxCoeff());
  CHECK((A * x - rhs).cwiseAbs().maxCoeff() < 1e-10);
  // the bare linearization is rank deficient up to O(h^2)
  const Eigen::MatrixXd Jd(J);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jd);
  const auto sv = svd.singularValues();
  CHECK(sv[N - 1] / sv[0] < 1e-2);
}

TEST_CASE("newton from a near-exact start") {
  auto d = CapDomain::build(3, kTheta, GridMode::axisym, 50);
  SolverConfig cfg;
  auto r = newton_solve(ell(d), ScalarField(d, Eigen::VectorXd::Constant(50, 3.0)), 2, cfg);
  CHECK(r.iterations <= 2);
  CHECK(r.residual <= 1e-10);
  CHECK((r.s.values() - ell(d).values()).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("newton with the translation constraint normalizes the gauge") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 16, 32);
  SolverConfig cfg;
  cfg.newton_tol = 1e-9;
  auto start = sample(d, [](double r, double p) { return ell_fn(r) + 0.1 * std::sin(r) * std::cos(p); });
  auto r = newton_solve(start, forward(ell(d), 2), 2, cfg, ConstraintKind::translation);
  for (int c : {0, 1}) {
    const Eigen::VectorXd z = zeta_col(*d, c);
    CHECK(std::abs((d->weights().array() * z.array() * r.s.values().array()).sum()) < 1e-10);
  }
  CHECK((r.s.values() - ell(d).values()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("translation point examples") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 48, 96);
  auto h0 = ell(d);
  for (auto psi : {EntropyWeight::square(), EntropyWeight::power(-1.0), EntropyWeight::neglog()}) {
    auto tp = find_translation_point(h0, psi);
    CHECK(tp.z.norm() <= 1e-10);
  }
  auto h1 = sample(d, [](double r, double p) { return ell_fn(r) + 0.1 * std::sin(r) * std::cos(p); });
  for (auto psi : {EntropyWeight::square(), EntropyWeight::power(-1.0)}) {
    auto tp = find_translation_point(h1, psi);
    CHECK(std::abs(tp.z[0] - 0.1) <= 1e-8);
    CHECK(std::abs(tp.z[1]) <= 1e-8);
  }
  auto h3 = sample(d, [](double r, double p) { return ell_fn(r) + 0.05 * g3(r, p); });
  CHECK(find_translation_point(h3, EntropyWeight::power(-1.0)).z.norm() <= 1e-10);
  auto a = CapDomain::build(3, kTheta, GridMode::axisym, 20);
  CHECK(find_translation_point(ell(a), EntropyWeight::neglog()).z.norm() == 0.0);
  auto neg = sample(d, [](double r, double) { return ell_fn(r) - 0.6; });
  CHECK_THROWS_AS(find_translation_point(neg, EntropyWeight::neglog()), HypothesisError);
}

TEST_CASE("translation point agrees with brute-force minimization") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 24, 48);
  auto h = sample(d, [](double r, double p) {
    return ell_fn(r) + 0.04 * g2(r, p + 0.3) + 0.03 * g3(r, p) + std::sin(r) * (0.07 * std::cos(p) - 0.04 * std::sin(p)) +
           0.05 * std::sin(r) * std::sin(r) * std::sin(p);
  });
  const Eigen::VectorXd z0 = zeta_col(*d, 0), z1 = zeta_col(*d, 1);
  const Eigen::VectorXd& w = d->weights();
  for (auto psi : {EntropyWeight::power(-1.0), EntropyWeight::neglog(), EntropyWeight::square()}) {
    auto F = [&](double a, double b) {
      double acc = 0.0;
      for (Eigen::Index p = 0; p < w.size(); ++p) {
        const double x = h[static_cast<std::size_t>(p)] - a * z0[p] - b * z1[p];
        if (psi.kind == EntropyWeight::Kind::square) acc += w[p] * x * x;
        else if (psi.kind == EntropyWeight::Kind::neglog) acc += -w[p] * std::log(x);
        else acc += w[p] / x;
      }
      return acc;
    };
    // shrinking grid search
    double ca = 0.0, cb = 0.0, span = 0.2;
    for (int level = 0; level < 40; ++level) {
      double best = F(ca, cb), ba = ca, bb = cb;
      for (int ia = -4; ia <= 4; ++ia)
        for (int ib = -4; ib <= 4; ++ib) {
          const double a = ca + span * ia / 4, b = cb + span * ib / 4;
          const double v = F(a, b);
          if (v < best) best = v, ba = a, bb = b;
        }
      ca = ba;
      cb = bb;
      span *= 0.5;
    }
    auto tp = find_translation_point(h, psi);
    CHECK(std::abs(tp.z[0] - ca) < 1e-6);
    CHECK(std::abs(tp.z[1] - cb) < 1e-6);
  }
}

TEST_CASE("even homotopy schedule") {
  auto d = CapDomain::build(3, kTheta, GridMode::axisym, 20);
  auto phi = sample(d, [](double r, double) { return 2.0 + 0.5 * std::cos(r); }, false);
  EvenHomotopy H(phi, 2);
  CHECK((H.at(0.0).values().array() - 1.0).abs().maxCoeff() < 1e-15);
  CHECK((H.at(1.0).values() - phi.values()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(H.start_scale() == doctest::Approx(std::pow(3.0, -0.5)));
  const double c = 5.0;
  EvenHomotopy Hc(ScalarField(d, Eigen::VectorXd::Constant(20, c)), 2);
  double last = 1.0;
  for (double t = 0.1; t <= 1.0 + 1e-12; t += 0.1) {
    const double v = Hc.at(t)[0];
    CHECK(v == doctest::Approx(std::pow(1 - t + t * std::pow(c, -0.5), -2.0)));
    CHECK(v > last);
    last = v;
  }
  EvenHomotopy Hn(ScalarField(d, Eigen::VectorXd::Constant(20, c)), 3);
  CHECK(Hn.at(0.5)[3] == doctest::Approx(0.5 + 0.5 * c));
}

TEST_CASE("translated homotopy fixed point and symmetric data") {
  auto d = CapDomain::build(2, kTheta, GridMode::full2d, 32, 64);
  SolverConfig cfg;
  auto phi = sample(d, [](double r, double) { return 1.0 / ell_fn(r); });
  TranslatedHomotopy H(phi, 1, EntropyWeight::neglog(), cfg);
  for (double t : {0.0, 0.3, 0.7, 1.0}) {
    auto pt = H.at(t);
    CHECK(pt.z.norm() < 1e-10);
    CHECK((pt.phi.values() - phi.values()).cwiseAbs().maxCoeff() < 1e-10);
  }
  auto phi3 = sample(d, [](double r, double p) { return 1.0 / (ell_fn(r) + 0.05 * g3(r, p)); });
  TranslatedHomotopy H3(phi3, 1, EntropyWeight::neglog(), cfg);
  for (double t : {0.0, 0.5, 1.0}) CHECK(H3.at(t).z.norm() < 1e-10);
  CHECK_THROWS_AS(TranslatedHomotopy(phi, 2, EntropyWeight::neglog(), cfg), HypothesisError);
}

TEST_CASE("solve_cm recovers caps and rejects bad data") {
  auto d = CapDomain::build(3, kTheta, GridMode::axisym, 60);
  SolverConfig cfg;
  const double r0 = 1.3;
  ProblemSpec p{2, HomotopyMode::even, Symmetry::none, ScalarField(d, Eigen::VectorXd::Constant(60, 3.0 * r0 * r0)), {}, {}};
  auto rep = solve_cm(p, cfg);
  CHECK((rep.solution.values() - r0 * ell(d).values()).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(rep.residual == doctest::Approx(residual(rep.solution, p.phi, 2).values().cwiseAbs().maxCoeff()));
  CHECK_FALSE(rep.steps.empty());
  for (const auto& st : rep.steps) CHECK(st.min_lambda > cfg.convexity_floor);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);

  auto rep2 = solve_cm(p, cfg);
  CHECK(rep2.solution.values() == rep.solution.values());

  Eigen::VectorXd bad = Eigen::VectorXd::Constant(60, 3.0);
  bad[10] = -1.0;
  ProblemSpec q{2, HomotopyMode::even, Symmetry::none, ScalarField(d, bad), {}, {}};
  CHECK_THROWS_AS(solve_cm(q, cfg), HypothesisError);

  auto f = CapDomain::build(2, kTheta, GridMode::full2d, 24, 48);
  auto tilted = sample(f, [](double r, double p) { return (1.0 + 0.3 * std::sin(r) * std::cos(p)) / ell_fn(r); });
  ProblemSpec t{1, HomotopyMode::translated, Symmetry::none, tilted, {}, {}};
  CHECK_THROWS_AS(solve_cm(t, cfg), HypothesisError);
  CHECK_FALSE(hypothesis_violations(t, cfg).empty());
  CHECK(integral_condition(tilted) > 1e-3);
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.dt_floor = 0.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  SolverConfig c2;
  c2.newton_tol = 0.0;
  CHECK_THROWS_AS(c2.validate(), InvalidArgument);
}

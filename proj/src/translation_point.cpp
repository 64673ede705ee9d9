#include "capcm/continuation.hpp"
#include "capcm/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace capcm {

EntropyWeight EntropyWeight::power(double p) {
  if (!(p < 0.0)) throw InvalidArgument("entropy power must be negative");
  return {Kind::power, p};
}

EntropyWeight EntropyWeight::for_order(int k) {
  if (k < 1) throw InvalidArgument("order k must be >= 1");
  return k == 1 ? neglog() : power(-(k - 1.0));
}

double EntropyWeight::value(double x) const {
  switch (kind) {
    case Kind::square: return x * x;
    case Kind::power: return std::pow(x, p);
    case Kind::neglog: return -std::log(x);
  }
  return 0.0;
}

double EntropyWeight::d1(double x) const {
  switch (kind) {
    case Kind::square: return 2.0 * x;
    case Kind::power: return p * std::pow(x, p - 1.0);
    case Kind::neglog: return -1.0 / x;
  }
  return 0.0;
}

double EntropyWeight::d2(double x) const {
  switch (kind) {
    case Kind::square: return 2.0;
    case Kind::power: return p * (p - 1.0) * std::pow(x, p - 2.0);
    case Kind::neglog: return 1.0 / (x * x);
  }
  return 0.0;
}

std::string EntropyWeight::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::square: os << "x^2"; break;
    case Kind::power: os << "x^" << p; break;
    case Kind::neglog: os << "-log x"; break;
  }
  return os.str();
}

TranslationPoint find_translation_point(const ScalarField& h, const EntropyWeight& psi, double tol, int max_iters) {
  const auto& d = h.domain();
  if (d.mode() != GridMode::full2d) return TranslationPoint{Eigen::VectorXd::Zero(d.dim()), 0.0, 1.0, 0};
  const auto N = static_cast<Eigen::Index>(d.size());
  Eigen::MatrixXd Z(N, 2);
  for (Eigen::Index p = 0; p < N; ++p) {
    const double sr = std::sin(d.rho(d.ring_of(static_cast<std::size_t>(p))));
    const double ph = d.phi(d.angle_of(static_cast<std::size_t>(p)));
    Z(p, 0) = sr * std::cos(ph);
    Z(p, 1) = sr * std::sin(ph);
  }
  const Eigen::VectorXd& w = d.weights();
  const Eigen::VectorXd& hv = h.values();
  if (psi.needs_positive() && !(hv.minCoeff() > 0.0))
    throw HypothesisError("translation point: h must be positive for " + psi.describe());

  // F(z) = int psi(h - <zeta, z>), convex in z; G = -grad F
  auto arg = [&](const Eigen::Vector2d& z) -> Eigen::VectorXd { return hv - Z * z; };
  auto feasible = [&](const Eigen::VectorXd& a) { return !psi.needs_positive() || a.minCoeff() > 0.0; };
  auto functional = [&](const Eigen::VectorXd& a) {
    double acc = 0.0;
    for (Eigen::Index p = 0; p < N; ++p) acc += w[p] * psi.value(a[p]);
    return acc;
  };

  auto gradient_hessian = [&](const Eigen::VectorXd& a, Eigen::Vector2d& G, Eigen::Matrix2d& H) {
    G.setZero();
    H.setZero();
    for (Eigen::Index p = 0; p < N; ++p) {
      const Eigen::Vector2d zp = Z.row(p).transpose();
      G += w[p] * psi.d1(a[p]) * zp;
      H += w[p] * psi.d2(a[p]) * zp * zp.transpose();
    }
  };

  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  Eigen::VectorXd a = arg(z);
  double scale = 0.0;
  for (Eigen::Index p = 0; p < N; ++p) scale += w[p] * std::abs(psi.d1(a[p])) * Z.row(p).norm();
  scale = std::max(scale, std::numeric_limits<double>::min());

  Eigen::Vector2d G;
  Eigen::Matrix2d H;
  gradient_hessian(a, G, H);
  for (int it = 0; it <= max_iters; ++it) {
    const double res = G.cwiseAbs().maxCoeff();
    if (res <= tol * scale) return TranslationPoint{z, res, scale, it};
    if (it == max_iters) break;
    // grad_z F = -G, Hess_z F = H; Newton step solves H dz = G
    const Eigen::Vector2d dz = H.ldlt().solve(G);
    const double f0 = functional(a);
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-12) {
      const Eigen::Vector2d zt = z + alpha * dz;
      const Eigen::VectorXd at = arg(zt);
      if (feasible(at)) {
        Eigen::Vector2d Gt;
        Eigen::Matrix2d Ht;
        gradient_hessian(at, Gt, Ht);
        // near the minimum F is flat to round-off; a smaller gradient is then the better test
        if (functional(at) <= f0 - 1e-4 * alpha * G.dot(dz) || Gt.cwiseAbs().maxCoeff() < 0.5 * res) {
          z = zt;
          a = at;
          G = Gt;
          H = Ht;
          moved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  std::ostringstream os;
  os << "translation point: Newton did not converge (" << psi.describe() << ")";
  throw NewtonError(os.str(), {});
}

}  // namespace capcm

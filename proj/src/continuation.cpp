#include "capcm/continuation.hpp"

#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"
#include "capcm/parallel.hpp"
#include "capcm/support_geometry.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace capcm {

std::string to_string(HomotopyMode mode) {
  switch (mode) {
    case HomotopyMode::even: return "even";
    case HomotopyMode::translated: return "translated";
    case HomotopyMode::minkowski: return "minkowski";
    case HomotopyMode::direct: return "direct";
  }
  return "direct";
}

HomotopyMode homotopy_mode_from_string(const std::string& name) {
  if (name == "even") return HomotopyMode::even;
  if (name == "translated") return HomotopyMode::translated;
  if (name == "minkowski") return HomotopyMode::minkowski;
  if (name == "direct") return HomotopyMode::direct;
  throw InvalidArgument("unknown homotopy mode '" + name + "'");
}

std::string to_string(Symmetry symmetry) { return symmetry == Symmetry::even ? "even" : "none"; }

Symmetry symmetry_from_string(const std::string& name) {
  if (name == "even") return Symmetry::even;
  if (name == "none") return Symmetry::none;
  throw InvalidArgument("unknown symmetry '" + name + "'");
}

void SolverConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
  };
  positive(newton_tol, "newton_tol");
  positive(min_step, "min_step");
  positive(dt_initial, "dt_initial");
  positive(dt_floor, "dt_floor");
  positive(convexity_floor, "convexity_floor");
  positive(boundary_tol, "boundary_tol");
  positive(integral_tol, "integral_tol");
  positive(hypothesis_tol, "hypothesis_tol");
  positive(translation_tol, "translation_tol");
  positive(path_tol, "path_tol");
  if (max_newton_iters < 1) throw InvalidArgument("max_newton_iters must be >= 1");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("backtrack must lie in (0, 1)");
  if (min_step > 1.0) throw InvalidArgument("min_step must be <= 1");
  if (dt_floor >= dt_initial) throw InvalidArgument("dt_floor must be below dt_initial");
  if (dt_initial > 1.0) throw InvalidArgument("dt_initial must be <= 1");
  if (psi_power && !(*psi_power < 0.0)) throw InvalidArgument("psi_power must be negative");
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// ---------------------------------------------------------------------------------------------
// node evaluation

namespace {

struct NodeEval {
  Eigen::VectorXd sigma;
  Eigen::VectorXd t_rr, t_rt, t_tt;  // Newton tensor: radial, mixed (x2 not applied), tangential sum
  Eigen::VectorXd lambda_min;
  std::vector<std::size_t> outside;  // nodes with tau not in Gamma_k
};

NodeEval evaluate_nodes(const ScalarField& s, int k, bool tensors) {
  const auto& d = s.domain();
  const int n = d.dim();
  if (k < 1 || k > n) throw InvalidArgument("order k must satisfy 1 <= k <= n");
  const auto& st = d.stencils(BoundaryClosure::robin);
  const Eigen::VectorXd& v = s.values();
  const Eigen::VectorXd a = st.hess_rr * v + v;
  const Eigen::VectorXd b = st.hess_tt * v + v;
  const bool full = d.mode() == GridMode::full2d;
  Eigen::VectorXd c;
  if (full) c = st.hess_rt * v;

  const auto N = static_cast<Eigen::Index>(d.size());
  NodeEval out;
  out.sigma.resize(N);
  out.lambda_min.resize(N);
  if (tensors) {
    out.t_rr.resize(N);
    out.t_rt.setZero(N);
    out.t_tt.resize(N);
  }
  std::vector<char> bad(static_cast<std::size_t>(N), 0);
  parallel_for(d.size(), [&](std::size_t up) {
    const auto p = static_cast<Eigen::Index>(up);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    M(0, 0) = a[p];
    for (int q = 1; q < n; ++q) M(q, q) = b[p];
    if (full) M(0, 1) = M(1, 0) = c[p];
    const auto e = elementary_symmetric(M, k);
    out.sigma[p] = e[k];
    for (int j = 1; j <= k; ++j)
      if (!(e[j] > 0.0)) bad[up] = 1;
    if (full) {
      const double mean = 0.5 * (a[p] + b[p]);
      const double rad = std::hypot(0.5 * (a[p] - b[p]), c[p]);
      out.lambda_min[p] = mean - rad;
    } else {
      out.lambda_min[p] = std::min(a[p], b[p]);
    }
    if (tensors) {
      const Eigen::MatrixXd T = newton_tensor(M, k);
      out.t_rr[p] = T(0, 0);
      double tt = 0.0;
      for (int q = 1; q < n; ++q) tt += T(q, q);
      out.t_tt[p] = tt;
      if (full) out.t_rt[p] = T(0, 1);
    }
  });
  for (std::size_t p = 0; p < bad.size(); ++p)
    if (bad[p]) out.outside.push_back(p);
  return out;
}

SparseMatrix jacobian_from(const CapDomain& d, const NodeEval& e) {
  const auto& st = d.stencils(BoundaryClosure::robin);
  SparseMatrix J = e.t_rr.asDiagonal() * st.hess_rr;
  J += e.t_tt.asDiagonal() * st.hess_tt;
  if (d.mode() == GridMode::full2d) J += (2.0 * e.t_rt).asDiagonal() * st.hess_rt;
  const auto N = static_cast<Eigen::Index>(d.size());
  SparseMatrix I(N, N);
  I.setIdentity();
  J += (e.t_rr + e.t_tt).asDiagonal() * I;
  J.makeCompressed();
  return J;
}

void check_same(const ScalarField& a, const ScalarField& b) {
  if (!a.domain().same_grid(b.domain())) throw InvalidArgument("fields live on different grids");
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

std::string node_list(const CapDomain& d, const std::vector<std::size_t>& nodes) {
  std::ostringstream os;
  os << nodes.size() << " node(s)";
  const std::size_t show = std::min<std::size_t>(nodes.size(), 5);
  if (show) os << ", first";
  for (std::size_t q = 0; q < show; ++q)
    os << " (j=" << d.ring_of(nodes[q]) << ", i=" << d.angle_of(nodes[q]) << ")";
  return os.str();
}

}  // namespace

ScalarField forward(const ScalarField& s, int k) {
  auto e = evaluate_nodes(s, k, false);
  return ScalarField(s.domain_ptr(), std::move(e.sigma));
}

ScalarField residual(const ScalarField& s, const ScalarField& phi, int k) {
  check_same(s, phi);
  auto e = evaluate_nodes(s, k, false);
  return ScalarField(s.domain_ptr(), e.sigma - phi.values());
}

ScalarField forward_exact(const AnalyticField& s, const DomainPtr& domain, int k) {
  const auto& d = *domain;
  if (k < 1 || k > d.dim()) throw InvalidArgument("order k must satisfy 1 <= k <= n");
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
  parallel_for(d.size(), [&](std::size_t p) {
    const double r = d.rho(d.ring_of(p)), ph = d.phi(d.angle_of(p));
    v[static_cast<Eigen::Index>(p)] = sigma_k(s.tau(r, ph, d.dim()), k);
  });
  return ScalarField(domain, std::move(v));
}

SparseMatrix assemble_jacobian(const ScalarField& s, int k, bool check_ellipticity) {
  const auto e = evaluate_nodes(s, k, true);
  if (check_ellipticity && !e.outside.empty())
    throw EllipticityError("tau[s] leaves Gamma_k at " + node_list(s.domain(), e.outside), e.outside);
  return jacobian_from(s.domain(), e);
}

// ---------------------------------------------------------------------------------------------
// bordered system

namespace {

Eigen::MatrixXd kernel_columns(const CapDomain& d) {
  const auto N = static_cast<Eigen::Index>(d.size());
  Eigen::MatrixXd Z(N, 2);
  for (std::size_t p = 0; p < d.size(); ++p) {
    const double sr = std::sin(d.rho(d.ring_of(p))), ph = d.phi(d.angle_of(p));
    Z(static_cast<Eigen::Index>(p), 0) = sr * std::cos(ph);
    Z(static_cast<Eigen::Index>(p), 1) = sr * std::sin(ph);
  }
  return Z;
}

Eigen::MatrixXd projection_rows(const CapDomain& d, const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd C(Z.cols(), Z.rows());
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    const Eigen::VectorXd wz = d.weights().cwiseProduct(Z.col(i));
    C.row(i) = wz.transpose() / wz.dot(Z.col(i));
  }
  return C;
}

}  // namespace

BorderedSystem kernel_augmentation(const SparseMatrix& jacobian, const CapDomain& d) {
  if (d.mode() != GridMode::full2d) throw InvalidArgument("kernel augmentation needs a full2d domain");
  const auto N = static_cast<Eigen::Index>(d.size());
  if (jacobian.rows() != N || jacobian.cols() != N) throw InvalidArgument("jacobian size does not match domain");
  BorderedSystem out;
  out.Z = kernel_columns(d);
  out.C = projection_rows(d, out.Z);
  const Eigen::Index m = out.Z.cols();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(jacobian.nonZeros() + 2 * m * N));
  for (Eigen::Index r = 0; r < jacobian.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(jacobian, r); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index p = 0; p < N; ++p) {
      trip.emplace_back(p, N + i, out.Z(p, i));
      trip.emplace_back(N + i, p, out.C(i, p));
    }
  out.matrix.resize(N + m, N + m);
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  out.matrix.makeCompressed();
  return out;
}

namespace {

Eigen::VectorXd lu_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& rhs) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw EllipticityError("linear system is singular (rank deficiency beyond the declared kernel): " +
                               lu.lastErrorMessage(),
                           {});
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw EllipticityError("linear solve failed", {});
  // iterative refinement
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd r = rhs - A * x;
    x += lu.solve(r);
  }
  return x;
}

}  // namespace

Eigen::VectorXd BorderedSystem::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != matrix.rows()) throw InvalidArgument("rhs size does not match bordered system");
  return lu_solve(matrix, rhs);
}

// ---------------------------------------------------------------------------------------------
// Newton

namespace {

// expansion s = P x for even-class unknowns
Eigen::SparseMatrix<double> even_expansion(const CapDomain& d) {
  const int half = d.nphi() / 2;
  const auto N = static_cast<Eigen::Index>(d.size());
  Eigen::SparseMatrix<double> P(N, static_cast<Eigen::Index>(d.nr()) * half);
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < d.nr(); ++j)
    for (int i = 0; i < d.nphi(); ++i)
      trip.emplace_back(static_cast<int>(d.index(j, i)), j * half + i % half, 1.0);
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

struct NewtonSystem {
  const CapDomain& d;
  const ScalarField& phi;
  int k;
  ConstraintKind kind;
  Eigen::MatrixXd Z, C;              // translation
  Eigen::SparseMatrix<double> P, S;  // even

  Eigen::Index unknowns() const {
    const auto N = static_cast<Eigen::Index>(d.size());
    if (kind == ConstraintKind::translation) return N + Z.cols();
    if (kind == ConstraintKind::even) return P.cols();
    return N;
  }

  Eigen::VectorXd field_of(const Eigen::VectorXd& x) const {
    const auto N = static_cast<Eigen::Index>(d.size());
    if (kind == ConstraintKind::translation) return x.head(N);
    if (kind == ConstraintKind::even) return P * x;
    return x;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x, const NodeEval& e) const {
    const auto N = static_cast<Eigen::Index>(d.size());
    Eigen::VectorXd F = e.sigma - phi.values();
    if (kind == ConstraintKind::translation) {
      Eigen::VectorXd R(unknowns());
      R.head(N) = F + Z * x.tail(Z.cols());
      R.tail(Z.cols()) = C * x.head(N);
      return R;
    }
    if (kind == ConstraintKind::even) return S * F;
    return F;
  }

  Eigen::SparseMatrix<double> matrix(const SparseMatrix& J) const {
    if (kind == ConstraintKind::translation) return kernel_augmentation(J, d).matrix;
    Eigen::SparseMatrix<double> Jc = J;
    if (kind == ConstraintKind::even) {
      Eigen::SparseMatrix<double> R = S * Jc * P;
      R.makeCompressed();
      return R;
    }
    Jc.makeCompressed();
    return Jc;
  }
};

}  // namespace

NewtonResult newton_solve(const ScalarField& s0, const ScalarField& phi, int k, const SolverConfig& config,
                          ConstraintKind constraints) {
  config.validate();
  check_same(s0, phi);
  const auto& d = s0.domain();
  NewtonSystem sys{d, phi, k, constraints, {}, {}, {}, {}};
  const auto N = static_cast<Eigen::Index>(d.size());

  Eigen::VectorXd x;
  if (constraints == ConstraintKind::translation) {
    if (d.mode() != GridMode::full2d) throw InvalidArgument("translation constraints need a full2d domain");
    sys.Z = kernel_columns(d);
    sys.C = projection_rows(d, sys.Z);
    x = Eigen::VectorXd::Zero(N + sys.Z.cols());
    x.head(N) = s0.values();
  } else if (constraints == ConstraintKind::even) {
    if (d.mode() != GridMode::full2d) throw InvalidArgument("even-class constraints need a full2d domain");
    sys.P = even_expansion(d);
    // selection of the first half of each ring
    const int half = d.nphi() / 2;
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < d.nr(); ++j)
      for (int i = 0; i < half; ++i) trip.emplace_back(j * half + i, static_cast<int>(d.index(j, i)), 1.0);
    sys.S.resize(sys.P.cols(), N);
    sys.S.setFromTriplets(trip.begin(), trip.end());
    // average s0 over the half-turn so the start lies in the even class
    const Eigen::VectorXd counts = sys.P.transpose() * Eigen::VectorXd::Ones(N);
    x = (sys.P.transpose() * s0.values()).cwiseQuotient(counts);
  } else {
    x = s0.values();
  }

  auto field = [&](const Eigen::VectorXd& xx) { return ScalarField(s0.domain_ptr(), sys.field_of(xx), true); };

  ScalarField s = field(x);
  NodeEval e = evaluate_nodes(s, k, true);
  if (!e.outside.empty())
    throw EllipticityError("initial guess: tau[s] leaves Gamma_k at " + node_list(d, e.outside), e.outside);
  Eigen::VectorXd R = sys.residual(x, e);
  double rnorm = R.lpNorm<Eigen::Infinity>();
  std::vector<double> trace{rnorm};

  int it = 0;
  bool roundoff = false;
  while (rnorm > config.newton_tol) {
    if (it >= config.max_newton_iters)
      throw NewtonError("Newton iteration cap reached (residual " + sci(rnorm) + ")", trace);
    const SparseMatrix J = jacobian_from(d, e);
    double row_max = 0.0;
    for (Eigen::Index r = 0; r < J.outerSize(); ++r) {
      double acc = 0.0;
      for (SparseMatrix::InnerIterator q(J, r); q; ++q) acc += std::abs(q.value());
      row_max = std::max(row_max, acc);
    }
    // residual noise from cancellation in the difference stencils
    const double noise = 32.0 * std::numeric_limits<double>::epsilon() * row_max * s.values().cwiseAbs().maxCoeff();
    const Eigen::VectorXd dx = lu_solve(sys.matrix(J), -R);

    double alpha = 1.0;
    const double r2 = R.norm();
    bool accepted = false;
    while (alpha >= config.min_step) {
      const Eigen::VectorXd xt = x + alpha * dx;
      ScalarField st = field(xt);
      if (st.values().allFinite()) {
        NodeEval et = evaluate_nodes(st, k, true);
        if (et.outside.empty()) {
          Eigen::VectorXd Rt = sys.residual(xt, et);
          if (Rt.norm() <= (1.0 - 1e-4 * alpha) * r2 || Rt.lpNorm<Eigen::Infinity>() <= config.newton_tol) {
            x = xt;
            s = std::move(st);
            e = std::move(et);
            R = std::move(Rt);
            accepted = true;
            break;
          }
        }
      }
      alpha *= config.backtrack;
    }
    ++it;
    if (!accepted && rnorm <= noise) {
      roundoff = true;
      break;
    }
    if (!accepted) {
      trace.push_back(rnorm);
      throw NewtonError("line search stalled (residual " + sci(rnorm) + ")", trace);
    }
    rnorm = R.lpNorm<Eigen::Infinity>();
    trace.push_back(rnorm);
  }

  NewtonResult out{s, it, rnorm, {}, trace, roundoff};
  if (constraints == ConstraintKind::translation) out.multipliers = x.tail(sys.Z.cols());
  return out;
}

// ---------------------------------------------------------------------------------------------
// homotopies

namespace {

ScalarField map_values(const ScalarField& f, const std::function<double(double)>& fn, bool capillary) {
  Eigen::VectorXd v = f.values().unaryExpr(fn);
  return ScalarField(f.domain_ptr(), std::move(v), capillary);
}

void require_positive(const ScalarField& phi, const char* what) {
  if (!(phi.values().minCoeff() > 0.0)) throw HypothesisError(std::string(what) + ": phi must be positive");
}

}  // namespace

EvenHomotopy::EvenHomotopy(ScalarField phi, int k) : phi_(std::move(phi)), k_(k) {
  if (k < 1 || k > phi_.domain().dim()) throw InvalidArgument("order k must satisfy 1 <= k <= n");
  require_positive(phi_, "even homotopy");
}

ScalarField EvenHomotopy::at(double t) const {
  const int n = phi_.domain().dim();
  if (k_ == n) return map_values(phi_, [t](double v) { return 1.0 - t + t * v; }, false);
  const double k = k_;
  return map_values(phi_, [t, k](double v) { return std::pow(1.0 - t + t * std::pow(v, -1.0 / k), -k); }, false);
}

double EvenHomotopy::start_scale() const { return std::pow(binomial(phi_.domain().dim(), k_), -1.0 / k_); }

TranslatedHomotopy::TranslatedHomotopy(ScalarField phi, int k, EntropyWeight psi, const SolverConfig& config)
    : phi_(std::move(phi)),
      inv_root_(phi_),
      ell_(ell(phi_.domain_ptr())),
      k_(k),
      psi_(psi),
      tol_(config.translation_tol) {
  if (k < 1 || k >= phi_.domain().dim()) throw HypothesisError("translated homotopy needs 1 <= k < n");
  require_positive(phi_, "translated homotopy");
  const double kk = k;
  inv_root_ = map_values(phi_, [kk](double v) { return std::pow(v, -1.0 / kk); }, true);
}

ScalarField TranslatedHomotopy::base(double t) const {
  return ScalarField(phi_.domain_ptr(), (1.0 - t) * ell_.values() + t * inv_root_.values(), true);
}

TranslatedHomotopy::Point TranslatedHomotopy::at(double t) const {
  const ScalarField h = base(t);
  const auto tp = find_translation_point(h, psi_, tol_);
  Eigen::VectorXd v = h.values();
  const auto& d = h.domain();
  if (d.mode() == GridMode::full2d) v -= kernel_columns(d) * tp.z;
  if (!(v.minCoeff() > 0.0))
    throw HypothesisError("translated homotopy: h_t - <zeta, z_t> is not positive");
  const double k = k_;
  v = v.unaryExpr([k](double x) { return std::pow(x, -k); });
  return Point{ScalarField(h.domain_ptr(), std::move(v)), tp.z};
}

// ---------------------------------------------------------------------------------------------
// hypotheses

double integral_condition(const ScalarField& phi) {
  const auto& d = phi.domain();
  if (d.mode() != GridMode::full2d) return 0.0;
  const Eigen::MatrixXd Z = kernel_columns(d);
  const Eigen::VectorXd wphi = d.weights().cwiseProduct(phi.values());
  const double scale = std::sin(d.theta()) * d.weights().dot(phi.values().cwiseAbs());
  if (!(scale > 0.0)) return 0.0;
  return (Z.transpose() * wphi).cwiseAbs().maxCoeff() / scale;
}

std::vector<std::string> hypothesis_violations(const ProblemSpec& problem, const SolverConfig& config) {
  std::vector<std::string> out;
  const auto& phi = problem.phi;
  const auto& d = phi.domain();
  const int n = d.dim(), k = problem.k;
  if (k < 1 || k > n) {
    out.push_back("order k must satisfy 1 <= k <= n");
    return out;
  }
  if (!(phi.values().minCoeff() > 0.0)) {
    out.push_back("phi must be positive at every node");
    return out;
  }
  const auto mode = problem.mode;
  const bool full = d.mode() == GridMode::full2d;
  const bool even_req = mode == HomotopyMode::even || problem.symmetry == Symmetry::even;

  if (mode == HomotopyMode::translated && k == n) out.push_back("k < n required for the translated homotopy");
  if (mode == HomotopyMode::minkowski && k != n) out.push_back("k = n required for the minkowski homotopy");
  if (k < n && d.theta() > M_PI / 2 - 1e-3) out.push_back("k < n requires theta <= pi/2 - 1e-3");

  if (full && even_req) {
    const double asym = (phi.values() - rotate_half_turn(phi).values()).cwiseAbs().maxCoeff();
    if (asym > config.hypothesis_tol * phi.values().cwiseAbs().maxCoeff()) {
      std::ostringstream os;
      os << "phi is not even (max |phi(x) - phi(-x)| = " << asym << ")";
      out.push_back(os.str());
    }
  }

  if (k < n && (mode == HomotopyMode::even || mode == HomotopyMode::translated || mode == HomotopyMode::direct)) {
    const double kk = k;
    const ScalarField root = map_values(phi, [kk](double v) { return std::pow(v, -1.0 / kk); }, false);
    const double lam = lambda_min_field(tau(root, BoundaryClosure::extrapolate)).values().minCoeff();
    if (lam < -config.hypothesis_tol) {
      std::ostringstream os;
      os << "tau[phi^(-1/k)] is not positive semidefinite (min eigenvalue " << lam << ")";
      out.push_back(os.str());
    }
    const auto rr = robin_residual(root);
    if (mode == HomotopyMode::translated || mode == HomotopyMode::direct) {
      if (rr.max_abs() > config.boundary_tol) {
        std::ostringstream os;
        os << "phi^(-1/k) is not capillary (max |d_mu f - cot(theta) f| = " << rr.max_abs() << ")";
        out.push_back(os.str());
      }
    } else if (rr.values.maxCoeff() > config.boundary_tol) {
      std::ostringstream os;
      os << "phi^(-1/k) violates d_mu f <= cot(theta) f (max excess " << rr.values.maxCoeff() << ")";
      out.push_back(os.str());
    }
  }
  if (full && !even_req &&
      (mode == HomotopyMode::minkowski || mode == HomotopyMode::translated || (mode == HomotopyMode::direct && k == n))) {
    const double ic = integral_condition(phi);
    if (ic > config.integral_tol) {
      std::ostringstream os;
      os << "integral condition int phi zeta_i = 0 fails (relative " << ic << ")";
      out.push_back(os.str());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// driver

namespace {

struct PathPoint {
  ScalarField phi;
  Eigen::VectorXd z;
};

struct PathResult {
  NewtonResult last;
};

PathResult run_path(const std::string& stage, const std::function<PathPoint(double)>& path, ScalarField s,
                    int k, ConstraintKind kind, const SolverConfig& config, SolveReport& report) {
  auto record = [&](double t, const NewtonResult& r, const Eigen::VectorXd& z, double dt) {
    const double lam = lambda_min_field(tau(r.s, BoundaryClosure::robin)).values().minCoeff();
    if (lam < config.convexity_floor) {
      std::ostringstream os;
      os << stage << " stage: lambda_min(tau) = " << lam << " below the convexity floor at t = " << t;
      throw ConvexityError(os.str());
    }
    report.steps.push_back(StepRecord{stage, t, r.iterations, r.residual, lam, z, dt});
  };

  PathPoint p0 = path(0.0);
  SolverConfig inner = config;
  inner.newton_tol = std::max(config.newton_tol, config.path_tol);
  NewtonResult cur = newton_solve(s, p0.phi, k, inner, kind);
  record(0.0, cur, p0.z, 0.0);

  double t = 0.0, dt = config.dt_initial;
  int easy = 0;
  while (t < 1.0) {
    const double t_try = std::min(1.0, t + dt);
    try {
      PathPoint pt = path(t_try);
      NewtonResult next = newton_solve(cur.s, pt.phi, k, t_try < 1.0 ? inner : config, kind);
      record(t_try, next, pt.z, t_try - t);
      cur = std::move(next);
      t = t_try;
      easy = cur.iterations <= 3 ? easy + 1 : 0;
      if (easy >= 2) {
        dt = std::min(1.0, 2.0 * dt);
        easy = 0;
      }
    } catch (const ConvexityError&) {
      throw;
    } catch (const Error& err) {
      dt *= 0.5;
      easy = 0;
      if (dt < config.dt_floor) {
        std::ostringstream os;
        os << stage << " stage stalled at t = " << t << " (step below " << config.dt_floor << "): " << err.what();
        throw ContinuationStall(os.str());
      }
    }
  }
  return PathResult{std::move(cur)};
}

ScalarField shifted(const ScalarField& s, const std::optional<Eigen::Vector2d>& shift) {
  if (!shift || s.domain().mode() != GridMode::full2d) return s;
  return s.with_values(s.values() + kernel_columns(s.domain()) * (*shift));
}

}  // namespace

SolveReport solve_cm(const ProblemSpec& problem, const SolverConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto& phi = problem.phi;
  const auto& d = phi.domain();
  const int n = d.dim(), k = problem.k;
  const bool full = d.mode() == GridMode::full2d;

  auto violations = hypothesis_violations(problem, config);
  std::vector<std::string> warnings;
  if (!violations.empty()) {
    const bool hard = problem.mode != HomotopyMode::direct || violations.front().rfind("phi must", 0) == 0 ||
                      violations.front().rfind("order k", 0) == 0;
    if (hard) {
      std::string msg = "hypothesis violation:";
      for (const auto& v : violations) msg += "\n  - " + v;
      throw HypothesisError(msg);
    }
    warnings = std::move(violations);
  }
  if (problem.symmetry == Symmetry::even && problem.initial_shift && full)
    throw InvalidArgument("an initial shift breaks the even class");

  const bool even_class = full && (problem.symmetry == Symmetry::even || problem.mode == HomotopyMode::even);
  const ConstraintKind kernel_kind = !full ? ConstraintKind::none
                                     : even_class ? ConstraintKind::even
                                                  : ConstraintKind::translation;

  SolveReport report{ell(phi.domain_ptr())};
  report.warnings = warnings;
  const ScalarField l = ell(phi.domain_ptr());
  NewtonResult final_result{l, 0, 0.0, {}, {}};

  switch (problem.mode) {
    case HomotopyMode::direct: {
      const ScalarField s0 = shifted(problem.initial ? problem.initial->with_capillary(true) : l, problem.initial_shift);
      const ConstraintKind kind = even_class ? ConstraintKind::even : ConstraintKind::none;
      final_result = newton_solve(s0, phi, k, config, kind);
      report.steps.push_back(StepRecord{"direct", 1.0, final_result.iterations, final_result.residual,
                                        lambda_min_field(tau(final_result.s)).values().minCoeff(), {}, 1.0});
      break;
    }
    case HomotopyMode::even: {
      const EvenHomotopy hom(phi, k);
      const ScalarField s0 = l.with_values(hom.start_scale() * l.values());
      final_result = run_path("even", [&](double t) { return PathPoint{hom.at(t), {}}; }, s0, k,
                              full ? ConstraintKind::even : ConstraintKind::none, config, report)
                         .last;
      break;
    }
    case HomotopyMode::minkowski: {
      const EvenHomotopy hom(phi, k);
      const ScalarField s0 = shifted(l, problem.initial_shift);
      final_result = run_path("minkowski", [&](double t) { return PathPoint{hom.at(t), {}}; }, s0, k, kernel_kind,
                              config, report)
                         .last;
      break;
    }
    case HomotopyMode::translated: {
      const EntropyWeight psi = config.psi_power ? EntropyWeight::power(*config.psi_power) : EntropyWeight::for_order(k);
      const TranslatedHomotopy hom(phi, k, psi, config);
      // pre-stage: the even path from phi = 1 to ell^{-k}, the t = 0 data of the translated path
      const double kk = k;
      const ScalarField target0 = map_values(l, [kk](double v) { return std::pow(v, -kk); }, false);
      const EvenHomotopy pre(target0, k);
      const ScalarField s0 = l.with_values(pre.start_scale() * l.values());
      auto staged = run_path("pre", [&](double t) { return PathPoint{pre.at(t), {}}; }, s0, k,
                             full ? ConstraintKind::even : ConstraintKind::none, config, report)
                        .last;
      final_result = run_path("translated",
                              [&](double t) {
                                auto p = hom.at(t);
                                return PathPoint{std::move(p.phi), std::move(p.z)};
                              },
                              shifted(staged.s, problem.initial_shift), k, kernel_kind, config, report)
                         .last;
      break;
    }
  }
  (void)n;

  report.solution = final_result.s;
  if (final_result.roundoff_floor)
    report.warnings.push_back("Newton stopped at the residual round-off floor above newton_tol");
  report.multipliers = final_result.multipliers;
  const ScalarField res = residual(report.solution, phi, k);
  report.residual = res.values().cwiseAbs().maxCoeff();
  report.min_lambda = lambda_min_field(tau(report.solution)).values().minCoeff();

  const std::string grid = d.describe();
  const double check_tol = std::max(config.newton_tol, config.path_tol);
  if (report.multipliers.size()) {
    const Eigen::VectorXd bordered = res.values() + kernel_columns(d) * report.multipliers;
    report.bordered_residual = bordered.cwiseAbs().maxCoeff();
    report.checks.push_back(CheckReport{"residual", {report.bordered_residual, report.residual}, check_tol,
                                        report.bordered_residual <= check_tol, grid,
                                        "max |sigma_k(tau[s]) + <zeta, mu> - phi|, then the raw residual"});
    const double mu = report.multipliers.cwiseAbs().maxCoeff();
    const double tol = d.h() * d.h();
    report.checks.push_back(CheckReport{"kernel multipliers", {mu}, tol, mu <= tol, grid,
                                        "discrete compatibility defect, O(h^2)"});
  } else {
    report.bordered_residual = report.residual;
    report.checks.push_back(CheckReport{"residual", {report.residual}, check_tol, report.residual <= check_tol, grid,
                                        "max |sigma_k(tau[s]) - phi|"});
  }
  report.checks.push_back(CheckReport{"convexity", {report.min_lambda}, config.convexity_floor,
                                      report.min_lambda >= config.convexity_floor, grid, "min lambda_min(tau[s])"});
  const double rr = robin_residual(report.solution).max_abs();
  report.checks.push_back(
      CheckReport{"capillary boundary", {rr}, config.boundary_tol, rr <= config.boundary_tol, grid,
                  "max |s_rho - cot(theta) s| at rho = theta"});
  if (full && kernel_kind == ConstraintKind::translation) {
    const Eigen::MatrixXd Z = kernel_columns(d);
    const Eigen::VectorXd m = Z.transpose() * d.weights().cwiseProduct(report.solution.values());
    const double v = m.cwiseAbs().maxCoeff();
    report.checks.push_back(CheckReport{"translation normalization", {m[0], m[1]}, 1e-8, v <= 1e-8, grid,
                                        "int s zeta_i dsigma"});
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace capcm

#include "capcm/cap_domain.hpp"

#include "capcm/error.hpp"
#include "capcm/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace capcm {

namespace {

constexpr double kPi = std::numbers::pi;

// int_0^x sin^m(t) dt by the standard reduction formula.
double sin_power_integral(int m, double x) {
  if (m == 0) return x;
  if (m == 1) return 1.0 - std::cos(x);
  return -std::pow(std::sin(x), m - 1) * std::cos(x) / m +
         (m - 1.0) / m * sin_power_integral(m - 2, x);
}

double unit_sphere_area(int dim) {
  // |S^{dim}| = 2 pi^{(dim+1)/2} / Gamma((dim+1)/2)
  const double a = 0.5 * (dim + 1);
  return 2.0 * std::pow(kPi, a) / std::tgamma(a);
}

struct Entry {
  std::size_t col;
  double weight;
};

}  // namespace

namespace detail {

std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> x, int max_order) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace detail

std::string to_string(GridMode mode) { return mode == GridMode::axisym ? "axisym" : "full2d"; }

GridMode grid_mode_from_string(const std::string& name) {
  if (name == "axisym") return GridMode::axisym;
  if (name == "full2d") return GridMode::full2d;
  throw InvalidArgument("unknown grid mode '" + name + "' (expected axisym or full2d)");
}

DomainPtr CapDomain::build(int n, double theta, GridMode mode, int nr, int nphi) {
  if (n < 2) throw InvalidArgument("hypersurface dimension n must be >= 2");
  if (!(theta > 0.0) || theta > 0.5 * kPi + 1e-14)
    throw InvalidArgument("contact angle theta must lie in (0, pi/2]");
  if (mode == GridMode::full2d && n != 2) throw InvalidArgument("full2d mode requires n = 2");
  if (nr < 4) throw InvalidArgument("radial node count Nr must be >= 4");
  if (mode == GridMode::full2d) {
    if (nphi == 0) nphi = 2 * nr;
    if (nphi < 4 || nphi % 2 != 0) throw InvalidArgument("Nphi must be even and >= 4");
  } else {
    nphi = 1;
  }

  auto d = std::shared_ptr<CapDomain>(new CapDomain());
  d->n_ = n;
  d->theta_ = std::min(theta, 0.5 * kPi);
  d->mode_ = mode;
  d->nr_ = nr;
  d->nphi_ = nphi;
  d->h_ = d->theta_ / nr;
  d->dphi_ = mode == GridMode::full2d ? 2.0 * kPi / nphi : 2.0 * kPi;

  const double sphere = unit_sphere_area(n - 1);
  const double angular = mode == GridMode::full2d ? d->dphi_ : sphere;
  d->weights_.resize(static_cast<Eigen::Index>(d->size()));
  for (int j = 0; j < nr; ++j) {
    const double cell = sin_power_integral(n - 1, (j + 1) * d->h_) - sin_power_integral(n - 1, j * d->h_);
    for (int i = 0; i < nphi; ++i) d->weights_[static_cast<Eigen::Index>(d->index(j, i))] = angular * cell;
  }
  d->total_measure_ = sphere * sin_power_integral(n - 1, d->theta_);

  // Ghost ring at rho = theta + h/2; positions in units of h relative to the boundary.
  {
    const double nodes[] = {0.5, -0.5, -1.5, -2.5};
    const auto w = detail::fd_weights(0.0, nodes, 1);
    const double cot = std::cos(d->theta_) / std::sin(d->theta_);
    double a[4];
    for (int q = 0; q < 4; ++q) a[q] = w[1][q] / d->h_ - cot * w[0][q];
    d->robin_ghost_ = {-a[1] / a[0], -a[2] / a[0], -a[3] / a[0]};
  }
  {
    const double nodes[] = {-0.5, -1.5, -2.5, -3.5};
    const auto w = detail::fd_weights(0.5, nodes, 0);
    d->extrap_ghost_.assign(w[0].begin(), w[0].end());
  }

  d->build_stencils(BoundaryClosure::robin, d->robin_);
  d->build_stencils(BoundaryClosure::extrapolate, d->extrapolated_);
  return d;
}

std::span<const double> CapDomain::ghost_weights(BoundaryClosure closure) const noexcept {
  return closure == BoundaryClosure::robin ? std::span<const double>(robin_ghost_)
                                           : std::span<const double>(extrap_ghost_);
}

bool CapDomain::same_grid(const CapDomain& o) const noexcept {
  return n_ == o.n_ && theta_ == o.theta_ && mode_ == o.mode_ && nr_ == o.nr_ && nphi_ == o.nphi_;
}

std::string CapDomain::describe() const {
  std::ostringstream os;
  os << "n=" << n_ << " theta=" << theta_ << " mode=" << to_string(mode_) << " Nr=" << nr_;
  if (mode_ == GridMode::full2d) os << " Nphi=" << nphi_;
  return os.str();
}

void CapDomain::build_stencils(BoundaryClosure closure, Stencils& out) const {
  const auto ghost = ghost_weights(closure);
  const bool full = mode_ == GridMode::full2d;
  const std::size_t N = size();

  // Resolves a possibly out-of-range (ring, angle) pair to node indices and weights.
  auto resolve = [&](int j, int i, std::vector<Entry>& into, double w) {
    if (full) i = ((i % nphi_) + nphi_) % nphi_;
    else i = 0;
    if (j >= 0 && j < nr_) {
      into.push_back({index(j, i), w});
    } else if (j < 0) {
      into.push_back({index(-j - 1, full ? (i + nphi_ / 2) % nphi_ : 0), w});
    } else if (j == nr_) {
      for (std::size_t m = 0; m < ghost.size(); ++m)
        into.push_back({index(nr_ - 1 - static_cast<int>(m), i), w * ghost[m]});
    }
  };

  using Triplets = std::vector<Eigen::Triplet<double>>;
  Triplets t_gr, t_gp, t_rr, t_rt, t_tt;
  std::vector<Entry> buf;
  auto emit = [&](Triplets& t, std::size_t row) {
    for (const auto& e : buf) t.emplace_back(static_cast<int>(row), static_cast<int>(e.col), e.weight);
    buf.clear();
  };

  // Radial first differences are scaled by sin(h) and angular ones by sin(dphi), which keeps
  // them second order and makes them exact on the span of {1, cos rho, sin rho cos phi, ...}.
  const double dr1 = 1.0 / (2.0 * std::sin(h_));
  const double dr2 = 1.0 / (h_ * h_);
  const double da1 = full ? 1.0 / (2.0 * std::sin(dphi_)) : 0.0;
  const double da2 = full ? 1.0 / (4.0 * std::pow(std::sin(0.5 * dphi_), 2)) : 0.0;
  // five-point radial difference for the terms divided by sin(rho); same exactness, fourth order
  const double w1 = 2.0 / 3.0, w2 = -1.0 / 12.0;
  const double c5 = 1.0 / (2.0 * w1 * std::sin(h_) + 2.0 * w2 * std::sin(2.0 * h_));
  auto radial_d1 = [&](int j, int i, double w) {
    if (j + 2 < nr_) {
      resolve(j + 1, i, buf, w * c5 * w1);
      resolve(j - 1, i, buf, -w * c5 * w1);
      resolve(j + 2, i, buf, w * c5 * w2);
      resolve(j - 2, i, buf, -w * c5 * w2);
    } else {
      resolve(j + 1, i, buf, w * dr1);
      resolve(j - 1, i, buf, -w * dr1);
    }
  };

  for (int j = 0; j < nr_; ++j) {
    const double r = rho(j);
    const double sr = std::sin(r);
    const double cot = std::cos(r) / sr;
    for (int i = 0; i < nphi_; ++i) {
      const std::size_t p = index(j, i);

      resolve(j + 1, i, buf, dr1);
      resolve(j - 1, i, buf, -dr1);
      emit(t_gr, p);

      resolve(j + 1, i, buf, dr2);
      resolve(j, i, buf, -2.0 * dr2);
      resolve(j - 1, i, buf, dr2);
      emit(t_rr, p);

      // cot(rho) f_rho part of the tangential entry
      radial_d1(j, i, cot);
      if (full) {
        resolve(j, i + 1, buf, da2 / (sr * sr));
        resolve(j, i, buf, -2.0 * da2 / (sr * sr));
        resolve(j, i - 1, buf, da2 / (sr * sr));
      }
      emit(t_tt, p);

      if (full) {
        resolve(j, i + 1, buf, da1 / sr);
        resolve(j, i - 1, buf, -da1 / sr);
        emit(t_gp, p);

        // (f_rho_phi - cot f_phi) / sin(rho)
        radial_d1(j, i + 1, da1 / sr);
        radial_d1(j, i - 1, -da1 / sr);
        resolve(j, i + 1, buf, -cot * da1 / sr);
        resolve(j, i - 1, buf, cot * da1 / sr);
        emit(t_rt, p);
      }
    }
  }

  auto make = [N](SparseMatrix& m, const Triplets& t) {
    m.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    m.setFromTriplets(t.begin(), t.end());
  };
  make(out.grad_rho, t_gr);
  make(out.hess_rr, t_rr);
  make(out.hess_tt, t_tt);
  if (full) {
    make(out.grad_phi, t_gp);
    make(out.hess_rt, t_rt);
  }
}

ScalarField::ScalarField(DomainPtr domain, Eigen::VectorXd values, bool capillary)
    : domain_(std::move(domain)), values_(std::move(values)), capillary_(capillary) {
  if (!domain_) throw InvalidArgument("ScalarField requires a domain");
  if (static_cast<std::size_t>(values_.size()) != domain_->size())
    throw InvalidArgument("ScalarField size does not match its domain");
  if (!values_.allFinite()) throw InvalidArgument("ScalarField values must be finite");
}

ScalarField ScalarField::with_values(Eigen::VectorXd values) const {
  return ScalarField(domain_, std::move(values), capillary_);
}

ScalarField ScalarField::with_capillary(bool flag) const { return ScalarField(domain_, values_, flag); }

SymTensorField::SymTensorField(DomainPtr domain, std::vector<Eigen::MatrixXd> matrices)
    : domain_(std::move(domain)), matrices_(std::move(matrices)), cache_(std::make_shared<EigenCache>()) {}

const std::vector<Eigen::VectorXd>& SymTensorField::eigenvalues() const {
  std::call_once(cache_->flag, [this] {
    cache_->values.resize(matrices_.size());
    parallel_for(matrices_.size(), [this](std::size_t p) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrices_[p], Eigen::EigenvaluesOnly);
      cache_->values[p] = es.eigenvalues();
    });
  });
  return cache_->values;
}

Eigen::VectorXd polar_to_ambient(const CapDomain& domain, double rho, std::span<const double> omega) {
  const int n = domain.dim();
  if (static_cast<int>(omega.size()) != n) throw InvalidArgument("omega must have n components");
  Eigen::VectorXd z(n + 1);
  const double s = std::sin(rho);
  for (int c = 0; c < n; ++c) z[c] = s * omega[c];
  z[n] = std::cos(rho) - std::cos(domain.theta());
  return z;
}

Eigen::VectorXd omega_at(const CapDomain& domain, int i) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(domain.dim());
  if (domain.mode() == GridMode::full2d) {
    w[0] = std::cos(domain.phi(i));
    w[1] = std::sin(domain.phi(i));
  } else {
    w[0] = 1.0;
  }
  return w;
}

double quadrature(const CapDomain& domain, const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != domain.size())
    throw InvalidArgument("quadrature: field size does not match the domain");
  return domain.weights().dot(values);
}

double quadrature(const CapDomain& domain, const ScalarField& f) {
  if (!domain.same_grid(f.domain())) throw InvalidArgument("quadrature: domain mismatch");
  return quadrature(domain, f.values());
}

double quadrature(const ScalarField& f) { return quadrature(f.domain(), f.values()); }

ScalarField horizontal_coordinate(const DomainPtr& domain, int c) {
  if (domain->mode() != GridMode::full2d)
    throw InvalidArgument("horizontal coordinates are not axisymmetric; use a full2d domain");
  if (c < 0 || c > 1) throw InvalidArgument("horizontal coordinate index must be 0 or 1");
  Eigen::VectorXd v(static_cast<Eigen::Index>(domain->size()));
  for (int j = 0; j < domain->nr(); ++j)
    for (int i = 0; i < domain->nphi(); ++i) {
      const double ang = c == 0 ? std::cos(domain->phi(i)) : std::sin(domain->phi(i));
      v[static_cast<Eigen::Index>(domain->index(j, i))] = std::sin(domain->rho(j)) * ang;
    }
  return ScalarField(domain, std::move(v), true);
}

FrameVectorField gradient(const ScalarField& f) { return gradient(f, f.closure()); }

FrameVectorField gradient(const ScalarField& f, BoundaryClosure closure) {
  const auto& d = f.domain();
  const auto& st = d.stencils(closure);
  FrameVectorField g{f.domain_ptr(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.size()), d.dim())};
  g.components.col(0) = st.grad_rho * f.values();
  if (d.mode() == GridMode::full2d) g.components.col(1) = st.grad_phi * f.values();
  return g;
}

SymTensorField covariant_hessian(const ScalarField& f) { return covariant_hessian(f, f.closure()); }

SymTensorField covariant_hessian(const ScalarField& f, BoundaryClosure closure) {
  const auto& d = f.domain();
  const auto& st = d.stencils(closure);
  const Eigen::VectorXd rr = st.hess_rr * f.values();
  const Eigen::VectorXd tt = st.hess_tt * f.values();
  Eigen::VectorXd rt;
  if (d.mode() == GridMode::full2d) rt = st.hess_rt * f.values();
  const int n = d.dim();
  std::vector<Eigen::MatrixXd> m(d.size());
  for (std::size_t p = 0; p < d.size(); ++p) {
    const auto q = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    h(0, 0) = rr[q];
    for (int c = 1; c < n; ++c) h(c, c) = tt[q];
    if (d.mode() == GridMode::full2d) h(0, 1) = h(1, 0) = rt[q];
    m[p] = std::move(h);
  }
  return SymTensorField(f.domain_ptr(), std::move(m));
}

BoundaryJet boundary_jet(const ScalarField& f) {
  const auto& d = f.domain();
  static const double nodes[] = {-0.5, -1.5, -2.5, -3.5};
  static const auto w = detail::fd_weights(0.0, nodes, 1);
  BoundaryJet jet{Eigen::VectorXd::Zero(d.nphi()), Eigen::VectorXd::Zero(d.nphi())};
  for (int i = 0; i < d.nphi(); ++i) {
    for (int q = 0; q < 4; ++q) {
      const double v = f.at(d.nr() - 1 - q, i);
      jet.value[i] += w[0][q] * v;
      jet.d_rho[i] += w[1][q] * v / d.h();
    }
  }
  return jet;
}

BoundaryTrace robin_residual(const ScalarField& f) {
  const auto& d = f.domain();
  const auto jet = boundary_jet(f);
  const double cot = std::cos(d.theta()) / std::sin(d.theta());
  return BoundaryTrace{f.domain_ptr(), jet.d_rho - cot * jet.value};
}

ScalarField rotate_half_turn(const ScalarField& f) {
  const auto& d = f.domain();
  if (d.mode() == GridMode::axisym) return f;
  Eigen::VectorXd v(f.values().size());
  for (int j = 0; j < d.nr(); ++j)
    for (int i = 0; i < d.nphi(); ++i)
      v[static_cast<Eigen::Index>(d.index(j, i))] = f.at(j, (i + d.nphi() / 2) % d.nphi());
  return f.with_values(std::move(v));
}

}  // namespace capcm

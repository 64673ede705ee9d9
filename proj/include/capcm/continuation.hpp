#pragma once

// Newton solver for sigma_k(tau[s]) = phi with the capillary boundary condition built into the
// stencil, plus the homotopy drivers that connect a cap to the target data.

#include "capcm/analytic.hpp"
#include "capcm/cap_domain.hpp"
#include "capcm/check_report.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <vector>

namespace capcm {

enum class HomotopyMode { even, translated, minkowski, direct };
enum class Symmetry { none, even };

std::string to_string(HomotopyMode mode);
HomotopyMode homotopy_mode_from_string(const std::string& name);
std::string to_string(Symmetry symmetry);
Symmetry symmetry_from_string(const std::string& name);

struct SolverConfig {
  double newton_tol = 1e-10;       ///< residual max-norm
  double path_tol = 1e-8;          ///< Newton tolerance at intermediate t < 1 (never below newton_tol)
  int max_newton_iters = 30;
  double backtrack = 0.5;
  double min_step = 1.0 / 4096.0;  ///< 2^-12
  double dt_initial = 0.1;
  double dt_floor = 1e-4;
  double convexity_floor = 1e-8;   ///< minimum lambda_min(tau) at accepted steps
  double boundary_tol = 1e-4;      ///< capillarity of phi^{-1/k}
  double integral_tol = 1e-8;      ///< relative size of int phi zeta_i
  double hypothesis_tol = 1e-6;    ///< tau[phi^{-1/k}] >= -tol
  std::optional<double> psi_power; ///< entropy exponent for the translation point; default -(k-1)
  double translation_tol = 1e-10;

  /// Throws InvalidArgument when a tolerance is non-positive or dt_floor >= dt_initial.
  void validate() const;
};

struct ProblemSpec {
  int k = 1;
  HomotopyMode mode = HomotopyMode::direct;
  Symmetry symmetry = Symmetry::none;
  ScalarField phi;
  /// Start for direct mode (default ell); ignored by homotopy modes.
  std::optional<ScalarField> initial;
  /// Horizontal shift <zeta, a> added to the t = 0 start (full2d, non-even runs).
  std::optional<Eigen::Vector2d> initial_shift;
};

struct StepRecord {
  std::string stage;
  double t = 0.0;
  int newton_iterations = 0;
  double residual = 0.0;
  double min_lambda = 0.0;
  Eigen::VectorXd z;  ///< translation point (translated mode), empty otherwise
  double dt = 0.0;
};

struct SolveReport {
  explicit SolveReport(ScalarField s) : solution(std::move(s)) {}

  ScalarField solution;
  std::vector<StepRecord> steps;
  /// Max-norm of sigma_k(tau[s]) - phi recomputed from `solution`.
  double residual = 0.0;
  /// Residual of the bordered equation sigma_k + <zeta, mu> = phi (equals `residual` without
  /// augmentation).
  double bordered_residual = 0.0;
  double min_lambda = 0.0;
  /// Kernel multipliers of the bordered system (empty without augmentation).
  Eigen::VectorXd multipliers;
  std::vector<CheckReport> checks;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

/// sigma_k(tau[s]) - phi at every node; tau uses the Robin closure.
ScalarField residual(const ScalarField& s, const ScalarField& phi, int k);

/// sigma_k(tau[s]) at every node with the Robin closure.
ScalarField forward(const ScalarField& s, int k);

/// sigma_k(tau[s]) from the exact derivatives of an analytic field, sampled at the nodes.
ScalarField forward_exact(const AnalyticField& s, const DomainPtr& domain, int k);

/// Derivative of `residual` with respect to the node values.  Throws EllipticityError when
/// tau[s] leaves Gamma_k at some node unless `check_ellipticity` is false.
SparseMatrix assemble_jacobian(const ScalarField& s, int k, bool check_ellipticity = true);

/// Bordered system [J Z; C 0] removing the horizontal-translation kernel.
///
/// Columns of Z hold zeta_i at the nodes; row i of C is the quadrature-weighted projection
/// onto zeta_i, so C s = 0 means int s zeta_i dsigma = 0.
struct BorderedSystem {
  Eigen::SparseMatrix<double> matrix;  // column-major for factorization
  Eigen::MatrixXd Z;
  Eigen::MatrixXd C;

  /// Solves matrix * x = rhs; throws EllipticityError if the factorization is singular.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
};

BorderedSystem kernel_augmentation(const SparseMatrix& jacobian, const CapDomain& domain);

enum class ConstraintKind {
  none,
  translation,  ///< bordered system with int s zeta_i = 0
  even,         ///< unknowns restricted to s(rho, phi) = s(rho, phi + pi)
};

struct NewtonResult {
  ScalarField s;
  int iterations = 0;
  double residual = 0.0;  ///< max-norm of the (bordered) Newton residual
  Eigen::VectorXd multipliers;
  std::vector<double> trace;
  /// Stopped above newton_tol because the residual reached its round-off floor.
  bool roundoff_floor = false;
};

NewtonResult newton_solve(const ScalarField& s0, const ScalarField& phi, int k, const SolverConfig& config,
                          ConstraintKind constraints = ConstraintKind::none);

/// Entropy weight psi in {x^2, x^p (p < 0), -log x}.
struct EntropyWeight {
  enum class Kind { square, power, neglog };
  Kind kind = Kind::square;
  double p = 2.0;

  static EntropyWeight square() { return {Kind::square, 2.0}; }
  static EntropyWeight power(double p);
  static EntropyWeight neglog() { return {Kind::neglog, 0.0}; }
  /// x^{-(k-1)} for k > 1, -log x for k = 1.
  static EntropyWeight for_order(int k);

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  bool needs_positive() const noexcept { return kind != Kind::square; }
  std::string describe() const;
};

struct TranslationPoint {
  Eigen::VectorXd z;
  double residual = 0.0;  ///< max |G_i(z)|
  double scale = 1.0;
  int iterations = 0;
};

/// Horizontal z with int psi'(h - <zeta, z>) zeta_i dsigma = 0.  On axisymmetric domains the
/// integrand is rotation invariant and z = 0.
TranslationPoint find_translation_point(const ScalarField& h, const EntropyWeight& psi, double tol = 1e-10,
                                        int max_iters = 100);

/// phi_t = (1 - t + t phi^{-1/k})^{-k} for k < n, 1 - t + t phi for k = n.
class EvenHomotopy {
 public:
  EvenHomotopy(ScalarField phi, int k);
  ScalarField at(double t) const;
  /// Exact t = 0 solution c * ell with binom(n, k) c^k = phi_0.
  double start_scale() const;

 private:
  ScalarField phi_;
  int k_;
};

/// phi_t = ((1 - t) ell + t phi^{-1/k} - <zeta, z_t>)^{-k}, z_t the translation point of
/// h_t = (1 - t) ell + t phi^{-1/k}.
class TranslatedHomotopy {
 public:
  /// Throws HypothesisError when phi violates the path hypotheses.
  TranslatedHomotopy(ScalarField phi, int k, EntropyWeight psi, const SolverConfig& config);

  ScalarField base(double t) const;

  struct Point {
    ScalarField phi;
    Eigen::VectorXd z;
  };
  Point at(double t) const;
  const EntropyWeight& psi() const noexcept { return psi_; }

 private:
  ScalarField phi_;
  ScalarField inv_root_;  // phi^{-1/k}
  ScalarField ell_;
  int k_;
  EntropyWeight psi_;
  double tol_;
};

/// Problem hypotheses that fail for this mode; empty when all hold.
std::vector<std::string> hypothesis_violations(const ProblemSpec& problem, const SolverConfig& config);

/// Relative size max_i |int phi zeta_i| / (sin(theta) int |phi|); zero on axisymmetric domains.
double integral_condition(const ScalarField& phi);

SolveReport solve_cm(const ProblemSpec& problem, const SolverConfig& config);

double binomial(int n, int k);

}  // namespace capcm

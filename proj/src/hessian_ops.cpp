#include "capcm/hessian_ops.hpp"

#include "capcm/error.hpp"
#include "capcm/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace capcm {

namespace {
void check_order(const Eigen::MatrixXd& M, int k) {
  if (M.rows() != M.cols()) throw InvalidArgument("sigma_k needs a square matrix");
  if (k < 1 || k > M.rows()) throw InvalidArgument("sigma_k order k must satisfy 1 <= k <= n");
}
}  // namespace

std::vector<double> elementary_symmetric(const Eigen::MatrixXd& M, int max_k) {
  std::vector<double> e(static_cast<std::size_t>(max_k) + 1, 0.0);
  e[0] = 1.0;
  if (max_k == 0) return e;
  // power sums p_i = tr(M^i)
  std::vector<double> p(static_cast<std::size_t>(max_k) + 1, 0.0);
  Eigen::MatrixXd power = M;
  for (int i = 1; i <= max_k; ++i) {
    p[i] = power.trace();
    if (i < max_k) power = power * M;
  }
  for (int k = 1; k <= max_k; ++k) {
    double acc = 0.0;
    for (int i = 1; i <= k; ++i) acc += ((i % 2) ? 1.0 : -1.0) * e[k - i] * p[i];
    e[k] = acc / k;
  }
  return e;
}

double sigma_k(const Eigen::MatrixXd& M, int k) {
  check_order(M, k);
  return elementary_symmetric(M, k)[k];
}

Eigen::MatrixXd newton_tensor(const Eigen::MatrixXd& M, int k) {
  check_order(M, k);
  const auto e = elementary_symmetric(M, k - 1);
  // T_0 = I, T_m = sigma_m I - M T_{m-1}
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int m = 1; m < k; ++m) {
    Eigen::MatrixXd next = -M * T;
    next.diagonal().array() += e[m];
    T = std::move(next);
  }
  return 0.5 * (T + T.transpose());
}

SigmaEval evaluate_sigma(const Eigen::MatrixXd& M, int k) {
  SigmaEval out;
  out.value = sigma_k(M, k);
  out.newton_tensor = newton_tensor(M, k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  out.lambda_min = es.eigenvalues()[0];
  return out;
}

bool in_gamma_k(const Eigen::MatrixXd& M, int k) {
  check_order(M, k);
  const auto e = elementary_symmetric(M, k);
  for (int j = 1; j <= k; ++j)
    if (!(e[j] > 0.0)) return false;
  return true;
}

double normalized_sigma(const Eigen::MatrixXd& M, int k) {
  if (!in_gamma_k(M, k)) throw InvalidArgument("normalized_sigma requires a matrix in Gamma_k");
  return std::pow(sigma_k(M, k), 1.0 / k);
}

ScalarField lambda_min_field(const SymTensorField& T) {
  const auto& ev = T.eigenvalues();
  Eigen::VectorXd v(static_cast<Eigen::Index>(T.size()));
  for (std::size_t p = 0; p < T.size(); ++p) v[static_cast<Eigen::Index>(p)] = ev[p][0];
  return ScalarField(T.domain_ptr(), std::move(v));
}

ScalarField sigma_k_field(const SymTensorField& T, int k) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(T.size()));
  parallel_for(T.size(), [&](std::size_t p) { v[static_cast<Eigen::Index>(p)] = sigma_k(T[p], k); });
  return ScalarField(T.domain_ptr(), std::move(v));
}

}  // namespace capcm

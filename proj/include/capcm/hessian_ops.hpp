#pragma once

// Elementary symmetric functions of the eigenvalues of a symmetric matrix, computed from
// power traces through Newton's identities, and their matrix derivative (Newton tensor).

#include "capcm/cap_domain.hpp"

#include <Eigen/Dense>

#include <vector>

namespace capcm {

/// sigma_k with its derivative and the smallest eigenvalue of the input.
struct SigmaEval {
  double value = 0.0;
  Eigen::MatrixXd newton_tensor;
  double lambda_min = 0.0;
};

/// sigma_0 .. sigma_{max_k} of the eigenvalues of M.
std::vector<double> elementary_symmetric(const Eigen::MatrixXd& M, int max_k);

double sigma_k(const Eigen::MatrixXd& M, int k);

/// d sigma_k / d M_ij = sum_{i<k} (-1)^i sigma_{k-1-i} M^i.
Eigen::MatrixXd newton_tensor(const Eigen::MatrixXd& M, int k);

SigmaEval evaluate_sigma(const Eigen::MatrixXd& M, int k);

/// sigma_1(M) > 0, ..., sigma_k(M) > 0.
bool in_gamma_k(const Eigen::MatrixXd& M, int k);

/// (sigma_k)^{1/k} on Gamma_k.
double normalized_sigma(const Eigen::MatrixXd& M, int k);

ScalarField lambda_min_field(const SymTensorField& T);

/// sigma_k at every node.
ScalarField sigma_k_field(const SymTensorField& T, int k);

}  // namespace capcm

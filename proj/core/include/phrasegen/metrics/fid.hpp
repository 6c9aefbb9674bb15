#pragma once

#include <vector>

#include <Eigen/Dense>

namespace phrasegen::metrics {

struct FidResult {
  double value = 0.0;
  /// Set when either covariance needed the eps*I ridge (too few samples or
  /// not positive definite).
  bool regularized = false;
};

/// Frechet distance between Gaussian fits of two latent sets (rows are
/// samples): ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).
FidResult phrase_fid(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& reference);
FidResult phrase_fid(const std::vector<std::vector<float>>& generated, const std::vector<std::vector<float>>& reference);

/// Tr((A B)^{1/2}) for symmetric positive semi-definite A, B, computed as
/// Tr((A^{1/2} B A^{1/2})^{1/2}).
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

Eigen::MatrixXd to_matrix(const std::vector<std::vector<float>>& rows);

}  // namespace phrasegen::metrics

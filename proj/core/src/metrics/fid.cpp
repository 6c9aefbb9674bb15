#include "phrasegen/metrics/fid.hpp"

#include <algorithm>
#include <cmath>

#include "phrasegen/errors.hpp"

namespace phrasegen::metrics {
namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool regularized = false;
};

Moments fit(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (n < 1) throw ConfigError("phrase_fid needs at least one sample per side");
  Moments m;
  m.mean = x.colwise().mean().transpose();
  if (n == 1) {
    m.cov = Eigen::MatrixXd::Zero(d, d);
  } else {
    const Eigen::MatrixXd c = x.rowwise() - m.mean.transpose();
    m.cov = (c.transpose() * c) / static_cast<double>(n - 1);
  }
  bool degenerate = n < d + 1;
  if (!degenerate) {
    Eigen::LLT<Eigen::MatrixXd> llt(m.cov);
    degenerate = llt.info() != Eigen::Success;
  }
  if (degenerate) {
    double eps = 1e-6 * m.cov.trace() / static_cast<double>(d);
    if (!(eps > 0.0)) eps = 1e-6;
    m.cov += eps * Eigen::MatrixXd::Identity(d, d);
    m.regularized = true;
  }
  return m;
}

}  // namespace

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd ra = psd_sqrt(a);
  const Eigen::MatrixXd inner = ra * b * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

FidResult phrase_fid(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& reference) {
  if (generated.cols() != reference.cols()) throw ConfigError("phrase_fid: latent dimensions differ");
  const Moments g = fit(generated);
  const Moments r = fit(reference);
  const double mean_term = (g.mean - r.mean).squaredNorm();
  const double trace_term = g.cov.trace() + r.cov.trace() - 2.0 * trace_sqrt_product(g.cov, r.cov);
  return FidResult{std::max(0.0, mean_term + trace_term), g.regularized || r.regularized};
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("ragged latent rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

FidResult phrase_fid(const std::vector<std::vector<float>>& generated, const std::vector<std::vector<float>>& reference) {
  return phrase_fid(to_matrix(generated), to_matrix(reference));
}

}  // namespace phrasegen::metrics

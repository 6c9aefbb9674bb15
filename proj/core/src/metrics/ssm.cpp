#include "phrasegen/metrics/ssm.hpp"

#include <algorithm>
#include <fstream>

#include "phrasegen/errors.hpp"

namespace phrasegen::metrics {

SSM ssm_from_bar_vectors(const std::vector<Eigen::VectorXd>& bar_vectors) {
  const auto n = static_cast<Eigen::Index>(bar_vectors.size());
  if (n < 1) throw ConfigError("bar_ssm needs at least one bar");
  SSM out;
  out.matrix = Eigen::MatrixXd::Identity(n, n);
  std::vector<double> norms(bar_vectors.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[i] = bar_vectors[i].norm();
    if (norms[i] == 0.0) out.has_zero_bar = true;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        s = std::clamp(bar_vectors[i].dot(bar_vectors[j]) / (norms[i] * norms[j]), -1.0, 1.0);
      }
      out.matrix(i, j) = s;
      out.matrix(j, i) = s;
    }
  }
  return out;
}

SSM bar_ssm(const std::vector<std::vector<std::vector<float>>>& bars) {
  std::size_t dim = 0;
  for (const auto& bar : bars) {
    for (const auto& z : bar) {
      if (dim == 0) dim = z.size();
      if (z.size() != dim) throw ConfigError("bar_ssm: latent dimensions differ");
    }
  }
  std::vector<Eigen::VectorXd> pooled;
  pooled.reserve(bars.size());
  for (const auto& bar : bars) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& z : bar) {
      for (std::size_t k = 0; k < dim; ++k) v[static_cast<Eigen::Index>(k)] += z[k];
    }
    if (!bar.empty()) v /= static_cast<double>(bar.size());
    pooled.push_back(std::move(v));
  }
  return ssm_from_bar_vectors(pooled);
}

std::vector<DiagonalRun> diagonal_runs(const Eigen::MatrixXd& ssm, const SrsOptions& options) {
  const int n = static_cast<int>(ssm.rows());
  if (ssm.cols() != ssm.rows()) throw ConfigError("SSM must be square");
  std::vector<DiagonalRun> runs;
  // runs_at[k] indexes into `runs` for offset k.
  std::vector<std::vector<std::size_t>> runs_at(static_cast<std::size_t>(std::max(n, 1)));
  for (int k = 1; k < n; ++k) {
    int start = -1;
    for (int i = 0; i <= n - k; ++i) {
      const bool bright = i < n - k && ssm(i, i + k) >= options.threshold;
      if (bright && start < 0) start = i;
      if (!bright && start >= 0) {
        runs_at[k].push_back(runs.size());
        runs.push_back(DiagonalRun{k, start, i - start, false});
        start = -1;
      }
    }
  }
  auto overlaps = [](const DiagonalRun& a, const DiagonalRun& b) {
    return a.row < b.row + b.length && b.row < a.row + a.length;
  };
  for (auto& run : runs) {
    if (run.length < options.min_length) continue;
    for (int nk : {run.offset - 1, run.offset + 1}) {
      if (nk < 1 || nk >= n) continue;
      for (std::size_t idx : runs_at[nk]) {
        const auto& other = runs[idx];
        if (other.length >= options.cluster_min_length && overlaps(run, other)) run.clustered = true;
      }
    }
  }
  return runs;
}

double srs(const Eigen::MatrixXd& ssm, const SrsOptions& options) {
  const auto n = ssm.rows();
  if (n < 1) throw ConfigError("srs needs at least one bar");
  long total = 0;
  for (const auto& run : diagonal_runs(ssm, options)) {
    if (run.length >= options.min_length && !run.clustered) total += run.length;
  }
  return static_cast<double>(total) / static_cast<double>(n);
}

double srs(const SSM& ssm, const SrsOptions& options) { return srs(ssm.matrix, options); }

void write_ssm_pgm(const SSM& ssm, const std::filesystem::path& path, int cell_pixels) {
  if (cell_pixels < 1) throw ConfigError("cell_pixels must be positive");
  const int n = ssm.n_bars();
  const int side = n * cell_pixels;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << side << ' ' << side << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(side));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = std::clamp(ssm.matrix(i, j), 0.0, 1.0);
      const auto v = static_cast<unsigned char>(s * 255.0 + 0.5);
      std::fill_n(row.begin() + j * cell_pixels, cell_pixels, v);
    }
    for (int r = 0; r < cell_pixels; ++r) out.write(reinterpret_cast<const char*>(row.data()), side);
  }
}

}  // namespace phrasegen::metrics

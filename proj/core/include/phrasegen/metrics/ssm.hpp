#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace phrasegen::metrics {

/// Bar self-similarity matrix of cosine similarities.
struct SSM {
  Eigen::MatrixXd matrix;
  /// Set when some bar pooled to the zero vector; its off-diagonal entries
  /// are 0.
  bool has_zero_bar = false;

  int n_bars() const noexcept { return static_cast<int>(matrix.rows()); }
};

/// `bars[i]` holds the phrase latents of bar i with END_OF_BAR latents
/// already removed. Each bar is average-pooled. A bar without phrases pools
/// to the zero vector.
SSM bar_ssm(const std::vector<std::vector<std::vector<float>>>& bars);

/// Same, from already pooled bar vectors.
SSM ssm_from_bar_vectors(const std::vector<Eigen::VectorXd>& bar_vectors);

/// A maximal run of bright cells on the diagonal at `offset`, covering rows
/// [row, row + length) and columns shifted by `offset`.
struct DiagonalRun {
  int offset = 0;
  int row = 0;
  int length = 0;
  bool clustered = false;
};

struct SrsOptions {
  double threshold = 0.5;
  int min_length = 4;
  /// Neighbouring runs shorter than this never cause clustering.
  int cluster_min_length = 2;
};

/// Runs at every offset >= 1 (bright means similarity >= threshold), with
/// the cluster flag filled in for runs of at least `min_length`.
std::vector<DiagonalRun> diagonal_runs(const Eigen::MatrixXd& ssm, const SrsOptions& options = {});

/// Sum of lengths of unclustered runs of at least `min_length`, divided by
/// the number of bars.
double srs(const SSM& ssm, const SrsOptions& options = {});
double srs(const Eigen::MatrixXd& ssm, const SrsOptions& options = {});

/// Binary PGM (P5) with similarity clamped to [0, 1] mapped onto 0..255.
void write_ssm_pgm(const SSM& ssm, const std::filesystem::path& path, int cell_pixels = 4);

}  // namespace phrasegen::metrics

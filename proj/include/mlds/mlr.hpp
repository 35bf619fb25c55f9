#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mlds/tensor.hpp"

namespace mlds {

/// Regression samples (x_i, y_i) with a partition into the index sets used for
/// the second- and third-moment estimates.
struct RegressionDataset {
  Eigen::MatrixXd covariates;  // N x d, row i is x_i
  Eigen::VectorXd responses;   // N
  std::vector<std::size_t> second_moment_idx;
  std::vector<std::size_t> third_moment_idx;

  /// Uses the first ceil(N/2) samples for the second moment and the rest for the third.
  static RegressionDataset with_default_partition(Eigen::MatrixXd x, Eigen::VectorXd y);

  Eigen::Index dim() const { return covariates.cols(); }
  std::size_t size() const { return static_cast<std::size_t>(responses.size()); }

  /// Throws ValidationError unless the two index sets are nonempty, disjoint
  /// and together cover every sample.
  void validate() const;
};

struct MixtureEstimate {
  Eigen::VectorXd weights;       // K
  Eigen::MatrixXd coefficients;  // d x K, column k is beta_k
  /// Set when a decomposition weight came out non-positive (heavy noise).
  bool low_confidence = false;
  /// Set when first-moment refinement was skipped because the coefficients are rank deficient.
  bool refine_rank_deficient = false;

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
};

/// W (d x K) with W' M2 W = I_K, and the pseudo-inverse of W' (d x K).
struct WhiteningMatrix {
  Eigen::MatrixXd w;
  Eigen::MatrixXd pinv_wt;
  Eigen::VectorXd singular_values;
};

/// (1 / 2N2) sum_{i in N2} y_i^2 (x_i x_i' - I).
Eigen::MatrixXd estimate_m2(const RegressionDataset& data);

/// Rank-K whitening of a symmetric matrix from its K largest eigenpairs.
/// Throws DegenerateMixtureError when the K-th value is not above `threshold`.
WhiteningMatrix whitening_from_m2(const Eigen::MatrixXd& m2, std::size_t k,
                                  double threshold = 1e-10);

/// (1 / 6N3) sum_{i in N3} y_i^3 [ (W'x_i)^3 - E(x_i)(W, W, W) ], with
/// E(x)(W, W, W)_{abc} = z_a G_bc + z_b G_ac + z_c G_ab for z = W'x, G = W'W.
SymTensor3 estimate_whitened_m3(const RegressionDataset& data, const WhiteningMatrix& w);

/// Maps whitened factors back: p = 1 / lambda^2, beta = lambda * (W')^+ v.
MixtureEstimate dewhiten(const std::vector<TensorFactor>& factors, const WhiteningMatrix& w);

/// Whiten, decompose and dewhiten given second- and third-moment estimates.
/// `m3` is the unwhitened third moment over R^d.
MixtureEstimate mlr_fit_moments(const Eigen::MatrixXd& m2, const SymTensor3& m3, std::size_t k,
                                const TpmParams& params, std::uint64_t seed);

/// End-to-end spectral estimate of a K-component mixture of linear regressions.
MixtureEstimate mlr_fit(const RegressionDataset& data, std::size_t k, const TpmParams& params,
                        std::uint64_t seed);

/// (1 / N) sum_i x_i y_i over every sample.
Eigen::VectorXd estimate_m1(const RegressionDataset& data);

/// Re-solves the weights with the coefficients fixed:
/// min ||sum_k p_k beta_k - m1||^2 subject to sum_k p_k = 1, then clamps each
/// weight to >= 1e-6 and renormalizes. Rank-deficient coefficients leave the
/// estimate unchanged with `refine_rank_deficient` set.
MixtureEstimate refine_first_moment(const MixtureEstimate& est, const Eigen::VectorXd& m1);
MixtureEstimate refine_first_moment(const MixtureEstimate& est, const RegressionDataset& data);

}  // namespace mlds

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mlds/lds.hpp"
#include "mlds/mlr.hpp"
#include "mlds/tensor.hpp"

namespace mlds {

/// Stacked covariate [u_{t-1}', ..., u_{t-L}']' for one selected time t.
struct StackedInput {
  std::size_t time = 0;
  Eigen::VectorXd covariate;
};

/// Stacks inputs at every t in {L, 2L, ..., floor(T/L) L}; trailing samples
/// past the last multiple of L are dropped. `inputs` is T x m with row t = u_t.
/// Throws InsufficientLengthError when T < L.
std::vector<StackedInput> stack_inputs(const Eigen::MatrixXd& inputs, std::size_t horizon);

/// Origin of one regression sample.
struct SampleOrigin {
  std::size_t trajectory = 0;
  std::size_t time = 0;
};

struct StackedRegression {
  RegressionDataset data;
  std::vector<SampleOrigin> provenance;  // provenance[j] is the origin of sample j
};

/// Split of trajectory indices into the second- and third-moment sets.
struct TrajectoryPartition {
  std::vector<std::size_t> second_moment;
  std::vector<std::size_t> third_moment;

  /// First ceil(N/2) trajectories for the second moment, the rest for the third.
  static TrajectoryPartition halves(std::size_t n);
};

/// Builds the regression instance x = u_bar / sigma_u, y = y_t over N x J. The
/// sample partition follows the trajectory partition.
StackedRegression build_stacked_regression(const TrajectoryDataset& data, std::size_t horizon,
                                           double sigma_u, const TrajectoryPartition& partition);

/// Estimated mixture in Markov-parameter space.
struct MarkovEstimate {
  Eigen::VectorXd weights;
  std::vector<MarkovVector> components;
  bool low_confidence = false;
  bool refine_rank_deficient = false;
  /// Optional per-component state-space realizations.
  std::vector<StateSpace> realizations;

  std::size_t size() const { return components.size(); }
};

struct FitOptions {
  std::size_t horizon = 7;  // L
  std::size_t k = 3;
  double sigma_u = 1.0;
  std::optional<TrajectoryPartition> partition;  // defaults to halves
  TpmParams tpm;
  std::uint64_t seed = 0;
};

/// Reduces the trajectories to a mixture of linear regressions, fits it and
/// rescales the coefficients back to Markov parameters.
MarkovEstimate mlds_fit(const TrajectoryDataset& data, const FitOptions& options);

/// mlds_fit followed by first-moment weight refinement over all stacked samples.
MarkovEstimate mlds_fit_refined(const TrajectoryDataset& data, const FitOptions& options);

struct OlsResult {
  MarkovVector markov;
  bool rank_deficient = false;
};

/// Per-trajectory least squares of y_t on u_bar_t over all t = L..T
/// (overlapping rows). Minimum-norm solution when rank deficient.
OlsResult ols_markov(const Trajectory& trajectory, std::size_t horizon);

struct HoKalmanResult {
  StateSpace system;
  Eigen::VectorXd hankel_singular_values;
  /// Set when the Hankel spectrum disagrees with the requested order.
  bool order_mismatch = false;
};

/// Balanced Ho-Kalman realization of order n from g(1..L), L >= 2n+1.
///
/// The Hankel matrix has n1 = L - floor(L/2) block rows and n2 = floor(L/2)
/// block columns with block (i, j) = g(i + j + 1)' (0-based i, j), so it uses
/// g(1..L-1); the shifted Hankel uses g(2..L). From the rank-r SVD
/// H = U S V', O = U S^1/2 and R = S^1/2 V' give C = first row of O,
/// B = first m columns of R and A = O^+ H_shift R^+. If the numerical rank r is
/// below n, the realization is padded with decoupled zero states so that the
/// order is still n and the Markov parameters are unchanged.
HoKalmanResult ho_kalman(const MarkovVector& g, std::size_t n);

}  // namespace mlds

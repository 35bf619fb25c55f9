#include "mlds/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mlds/errors.hpp"

namespace mlds {

std::vector<StackedInput> stack_inputs(const Eigen::MatrixXd& inputs, std::size_t horizon) {
  if (horizon < 1) throw ValidationError("stack_inputs: L must be >= 1");
  const auto t_total = static_cast<std::size_t>(inputs.rows());
  if (t_total < horizon) throw InsufficientLengthError(t_total, horizon);
  const Eigen::Index m = inputs.cols();
  std::vector<StackedInput> out;
  out.reserve(t_total / horizon);
  for (std::size_t t = horizon; t <= t_total; t += horizon) {
    StackedInput s;
    s.time = t;
    s.covariate.resize(static_cast<Eigen::Index>(horizon) * m);
    for (std::size_t lag = 1; lag <= horizon; ++lag)
      s.covariate.segment(static_cast<Eigen::Index>(lag - 1) * m, m) =
          inputs.row(static_cast<Eigen::Index>(t - lag)).transpose();
    out.push_back(std::move(s));
  }
  return out;
}

TrajectoryPartition TrajectoryPartition::halves(std::size_t n) {
  TrajectoryPartition p;
  const std::size_t n2 = (n + 1) / 2;
  p.second_moment.resize(n2);
  std::iota(p.second_moment.begin(), p.second_moment.end(), std::size_t{0});
  p.third_moment.resize(n - n2);
  std::iota(p.third_moment.begin(), p.third_moment.end(), n2);
  return p;
}

StackedRegression build_stacked_regression(const TrajectoryDataset& data, std::size_t horizon,
                                           double sigma_u, const TrajectoryPartition& partition) {
  data.validate();
  if (!(sigma_u > 0.0)) throw ValidationError("sigma_u must be > 0");
  if (data.horizon_t < horizon) throw InsufficientLengthError(data.horizon_t, horizon);

  std::vector<int> role(data.size(), -1);
  for (std::size_t i : partition.second_moment) {
    if (i >= data.size() || role[i] != -1) throw ValidationError("partition: bad or repeated index");
    role[i] = 2;
  }
  for (std::size_t i : partition.third_moment) {
    if (i >= data.size() || role[i] != -1) throw ValidationError("partition: bad or repeated index");
    role[i] = 3;
  }
  if (std::find(role.begin(), role.end(), -1) != role.end())
    throw ValidationError("partition: does not cover every trajectory");

  const std::size_t per_traj = data.horizon_t / horizon;
  const auto d = static_cast<Eigen::Index>(horizon * data.input_dim);
  StackedRegression out;
  out.data.covariates.resize(static_cast<Eigen::Index>(data.size() * per_traj), d);
  out.data.responses.resize(static_cast<Eigen::Index>(data.size() * per_traj));
  out.provenance.reserve(data.size() * per_traj);
  std::size_t j = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Trajectory& tr = data.trajectories[i];
    for (StackedInput& s : stack_inputs(tr.inputs, horizon)) {
      const auto row = static_cast<Eigen::Index>(j);
      out.data.covariates.row(row) = s.covariate.transpose() / sigma_u;
      out.data.responses(row) = tr.outputs(static_cast<Eigen::Index>(s.time - 1));
      out.provenance.push_back({i, s.time});
      (role[i] == 2 ? out.data.second_moment_idx : out.data.third_moment_idx).push_back(j);
      ++j;
    }
  }
  return out;
}

namespace {

MarkovEstimate to_markov(const MixtureEstimate& est, std::size_t horizon, std::size_t m,
                         double sigma_u) {
  MarkovEstimate out;
  out.weights = est.weights;
  out.low_confidence = est.low_confidence;
  out.refine_rank_deficient = est.refine_rank_deficient;
  for (Eigen::Index k = 0; k < est.coefficients.cols(); ++k)
    out.components.emplace_back(horizon, m, est.coefficients.col(k) / sigma_u);
  return out;
}

void check_fit_options(const TrajectoryDataset& data, const FitOptions& o) {
  if (o.horizon < 1) throw ValidationError("L must be >= 1");
  if (o.k < 1) throw ValidationError("K must be >= 1");
  if (o.k > o.horizon * data.input_dim) throw ValidationError("K must not exceed L*m");
  if (data.horizon_t < o.horizon) throw InsufficientLengthError(data.horizon_t, o.horizon);
  if (data.size() < 2) throw ValidationError("need at least 2 trajectories to split moments");
}

StackedRegression stacked_for(const TrajectoryDataset& data, const FitOptions& o) {
  check_fit_options(data, o);
  return build_stacked_regression(data, o.horizon, o.sigma_u,
                                  o.partition ? *o.partition : TrajectoryPartition::halves(data.size()));
}

}  // namespace

MarkovEstimate mlds_fit(const TrajectoryDataset& data, const FitOptions& options) {
  const StackedRegression stacked = stacked_for(data, options);
  const MixtureEstimate est = mlr_fit(stacked.data, options.k, options.tpm, options.seed);
  return to_markov(est, options.horizon, data.input_dim, options.sigma_u);
}

MarkovEstimate mlds_fit_refined(const TrajectoryDataset& data, const FitOptions& options) {
  const StackedRegression stacked = stacked_for(data, options);
  const MixtureEstimate est = mlr_fit(stacked.data, options.k, options.tpm, options.seed);
  const MixtureEstimate refined = refine_first_moment(est, stacked.data);
  return to_markov(refined, options.horizon, data.input_dim, options.sigma_u);
}

OlsResult ols_markov(const Trajectory& trajectory, std::size_t horizon) {
  if (horizon < 1) throw ValidationError("ols_markov: L must be >= 1");
  const std::size_t t_total = trajectory.length();
  if (t_total < horizon) throw InsufficientLengthError(t_total, horizon);
  const Eigen::Index m = trajectory.inputs.cols();
  const auto rows = static_cast<Eigen::Index>(t_total - horizon + 1);
  const auto cols = static_cast<Eigen::Index>(horizon) * m;

  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<Eigen::Index>(horizon) + r;  // output index, 1-based
    for (Eigen::Index lag = 1; lag <= static_cast<Eigen::Index>(horizon); ++lag)
      design.block(r, (lag - 1) * m, 1, m) = trajectory.inputs.row(t - lag);
    target(r) = trajectory.outputs(t - 1);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  OlsResult out;
  out.markov = MarkovVector(horizon, static_cast<std::size_t>(m), cod.solve(target));
  out.rank_deficient = rows < cols || cod.rank() < cols;
  return out;
}

HoKalmanResult ho_kalman(const MarkovVector& g, std::size_t n) {
  if (n < 1) throw ValidationError("ho_kalman: order must be >= 1");
  const std::size_t horizon = g.horizon;
  if (horizon < 2 * n + 1)
    throw ValidationError("ho_kalman: need L >= 2n+1 Markov parameters, got L=" +
                          std::to_string(horizon) + " for n=" + std::to_string(n));
  const auto m = static_cast<Eigen::Index>(g.input_dim);
  const auto n2 = static_cast<Eigen::Index>(horizon / 2);
  const auto n1 = static_cast<Eigen::Index>(horizon) - n2;
  const auto order = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd hankel(n1, n2 * m);
  Eigen::MatrixXd shifted(n1, n2 * m);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n2; ++j) {
      hankel.block(i, j * m, 1, m) = g.block(static_cast<std::size_t>(i + j + 1)).transpose();
      shifted.block(i, j * m, 1, m) = g.block(static_cast<std::size_t>(i + j + 2)).transpose();
    }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hankel, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  HoKalmanResult out;
  out.hankel_singular_values = sv;

  const double tol = sv.size() > 0 ? 1e-10 * std::max(sv(0), 1e-300) : 0.0;
  Eigen::Index rank = 0;
  while (rank < std::min<Eigen::Index>(order, sv.size()) && sv(rank) > tol) ++rank;
  if (rank < order) out.order_mismatch = true;
  if (sv.size() > order && sv(order) > 0.1 * sv(order - 1)) out.order_mismatch = true;

  StateSpace& ss = out.system;
  ss.a = Eigen::MatrixXd::Zero(order, order);
  ss.b = Eigen::MatrixXd::Zero(order, m);
  ss.c = Eigen::RowVectorXd::Zero(order);
  if (rank > 0) {
    const Eigen::VectorXd sqrt_s = sv.head(rank).cwiseSqrt();
    const Eigen::MatrixXd obs = svd.matrixU().leftCols(rank) * sqrt_s.asDiagonal();
    const Eigen::MatrixXd ctrb = sqrt_s.asDiagonal() * svd.matrixV().leftCols(rank).transpose();
    const Eigen::MatrixXd obs_pinv =
        sqrt_s.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(rank).transpose();
    const Eigen::MatrixXd ctrb_pinv =
        svd.matrixV().leftCols(rank) * sqrt_s.cwiseInverse().asDiagonal();
    ss.a.topLeftCorner(rank, rank) = obs_pinv * shifted * ctrb_pinv;
    ss.b.topRows(rank) = ctrb.leftCols(m);
    ss.c.head(rank) = obs.row(0);
  }
  return out;
}

}  // namespace mlds

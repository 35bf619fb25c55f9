#include "mlds/mlr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "mlds/errors.hpp"

namespace mlds {

RegressionDataset RegressionDataset::with_default_partition(Eigen::MatrixXd x, Eigen::VectorXd y) {
  RegressionDataset d;
  d.covariates = std::move(x);
  d.responses = std::move(y);
  const std::size_t n = d.size();
  const std::size_t n2 = (n + 1) / 2;
  d.second_moment_idx.resize(n2);
  std::iota(d.second_moment_idx.begin(), d.second_moment_idx.end(), std::size_t{0});
  d.third_moment_idx.resize(n - n2);
  std::iota(d.third_moment_idx.begin(), d.third_moment_idx.end(), n2);
  return d;
}

void RegressionDataset::validate() const {
  if (static_cast<std::size_t>(covariates.rows()) != size())
    throw ValidationError("regression: covariate and response counts differ");
  if (second_moment_idx.empty() || third_moment_idx.empty())
    throw ValidationError("regression: both partition sets must be nonempty");
  std::vector<char> seen(size(), 0);
  for (const auto* set : {&second_moment_idx, &third_moment_idx}) {
    for (std::size_t i : *set) {
      if (i >= size()) throw ValidationError("regression: partition index out of range");
      if (seen[i]++) throw ValidationError("regression: partition sets overlap");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ValidationError("regression: partition does not cover all samples");
}

Eigen::MatrixXd estimate_m2(const RegressionDataset& data) {
  if (data.second_moment_idx.empty()) throw ValidationError("estimate_m2: N2 is empty");
  const Eigen::Index d = data.dim();
  Eigen::MatrixXd scaled(static_cast<Eigen::Index>(data.second_moment_idx.size()), d);
  double sum_y2 = 0.0;
  for (std::size_t r = 0; r < data.second_moment_idx.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(data.second_moment_idx[r]);
    const double y = data.responses(i);
    scaled.row(static_cast<Eigen::Index>(r)) = y * data.covariates.row(i);
    sum_y2 += y * y;
  }
  Eigen::MatrixXd m2 = scaled.transpose() * scaled;
  m2.diagonal().array() -= sum_y2;
  m2 /= 2.0 * static_cast<double>(data.second_moment_idx.size());
  return 0.5 * (m2 + m2.transpose());
}

WhiteningMatrix whitening_from_m2(const Eigen::MatrixXd& m2, std::size_t k, double threshold) {
  const Eigen::Index d = m2.rows();
  const auto ki = static_cast<Eigen::Index>(k);
  if (m2.cols() != d) throw ValidationError("whitening: M2 must be square");
  if (k < 1 || ki > d)
    throw ValidationError("whitening: need 1 <= K <= d, got K=" + std::to_string(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m2 + m2.transpose()));
  if (eig.info() != Eigen::Success) throw Error("whitening: eigendecomposition failed");
  // Eigenvalues come in ascending order; take the K largest.
  Eigen::VectorXd values = eig.eigenvalues().tail(ki).reverse();
  Eigen::MatrixXd vectors = eig.eigenvectors().rightCols(ki).rowwise().reverse();
  if (!(values(ki - 1) > threshold)) throw DegenerateMixtureError(values(ki - 1), "whitening");

  WhiteningMatrix w;
  w.singular_values = values;
  w.w = vectors * values.cwiseSqrt().cwiseInverse().asDiagonal();
  w.pinv_wt = vectors * values.cwiseSqrt().asDiagonal();
  return w;
}

SymTensor3 estimate_whitened_m3(const RegressionDataset& data, const WhiteningMatrix& w) {
  if (data.third_moment_idx.empty()) throw ValidationError("estimate_whitened_m3: N3 is empty");
  if (w.w.rows() != data.dim()) throw ValidationError("estimate_whitened_m3: W has wrong row count");
  const Eigen::Index k = w.w.cols();
  const Eigen::MatrixXd gram = w.w.transpose() * w.w;

  // Accumulate over sorted triples only; the tensor is filled symmetrically at the end.
  std::vector<std::array<Eigen::Index, 3>> triples;
  for_each_sorted_index(k, [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
    triples.push_back({a, b, c});
  });
  std::vector<double> acc(triples.size(), 0.0);
  Eigen::VectorXd z(k);
  for (std::size_t i : data.third_moment_idx) {
    const auto row = static_cast<Eigen::Index>(i);
    const double y = data.responses(row);
    const double y3 = y * y * y;
    if (y3 == 0.0) continue;
    z.noalias() = w.w.transpose() * data.covariates.row(row).transpose();
    for (std::size_t t = 0; t < triples.size(); ++t) {
      const auto [a, b, c] = triples[t];
      const double rank_one = z(a) * z(b) * z(c);
      const double correction = z(a) * gram(b, c) + z(b) * gram(a, c) + z(c) * gram(a, b);
      acc[t] += y3 * (rank_one - correction);
    }
  }
  const double scale = 1.0 / (6.0 * static_cast<double>(data.third_moment_idx.size()));
  SymTensor3 m3(k);
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const auto [a, b, c] = triples[t];
    m3.set(a, b, c, scale * acc[t]);
  }
  return m3;
}

MixtureEstimate dewhiten(const std::vector<TensorFactor>& factors, const WhiteningMatrix& w) {
  constexpr double kMinScale = 1e-6;
  const auto k = static_cast<Eigen::Index>(factors.size());
  MixtureEstimate est;
  est.weights.resize(k);
  est.coefficients.resize(w.pinv_wt.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& raw = factors[static_cast<std::size_t>(j)];
    if (!(raw.weight > 0.0)) est.low_confidence = true;
    TensorFactor f = canonicalize_sign(raw);
    double scale = f.weight;
    if (!(scale > 0.0)) scale = kMinScale;
    est.weights(j) = 1.0 / (scale * scale);
    est.coefficients.col(j) = scale * (w.pinv_wt * f.vector);
  }
  return est;
}

MixtureEstimate mlr_fit_moments(const Eigen::MatrixXd& m2, const SymTensor3& m3, std::size_t k,
                                const TpmParams& params, std::uint64_t seed) {
  if (m3.dim() != m2.rows()) throw ValidationError("mlr_fit_moments: M2 and M3 dims differ");
  const WhiteningMatrix w = whitening_from_m2(m2, k);
  const SymTensor3 whitened = apply_matrix3(m3, w.w);
  return dewhiten(robust_tpm(whitened, k, params, seed), w);
}

MixtureEstimate mlr_fit(const RegressionDataset& data, std::size_t k, const TpmParams& params,
                        std::uint64_t seed) {
  data.validate();
  if (k < 1 || static_cast<Eigen::Index>(k) > data.dim())
    throw ValidationError("mlr_fit: need 1 <= K <= d");
  const WhiteningMatrix w = whitening_from_m2(estimate_m2(data), k);
  const SymTensor3 whitened = estimate_whitened_m3(data, w);
  return dewhiten(robust_tpm(whitened, k, params, seed), w);
}

Eigen::VectorXd estimate_m1(const RegressionDataset& data) {
  if (data.size() == 0) throw ValidationError("estimate_m1: no samples");
  return data.covariates.transpose() * data.responses / static_cast<double>(data.size());
}

MixtureEstimate refine_first_moment(const MixtureEstimate& est, const Eigen::VectorXd& m1) {
  const Eigen::MatrixXd& beta = est.coefficients;
  if (m1.size() != beta.rows()) throw ValidationError("refine: M1 dimension mismatch");
  const Eigen::Index k = beta.cols();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(beta);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    MixtureEstimate out = est;
    out.refine_rank_deficient = true;
    return out;
  }
  // KKT system of the equality-constrained least squares problem.
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = beta.transpose() * beta;
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Eigen::VectorXd rhs(k + 1);
  rhs.head(k) = beta.transpose() * m1;
  rhs(k) = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

  MixtureEstimate out = est;
  out.refine_rank_deficient = false;
  out.weights = sol.head(k).cwiseMax(1e-6);
  out.weights /= out.weights.sum();
  return out;
}

MixtureEstimate refine_first_moment(const MixtureEstimate& est, const RegressionDataset& data) {
  return refine_first_moment(est, estimate_m1(data));
}

}  // namespace mlds

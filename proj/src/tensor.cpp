#include "mlds/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlds/errors.hpp"
#include "mlds/random.hpp"

namespace mlds {

SymTensor3::SymTensor3(Eigen::Index dim) : dim_(dim) {
  if (dim < 1) throw ValidationError("SymTensor3: dim must be >= 1");
  data_.assign(static_cast<std::size_t>(dim * dim * dim), 0.0);
}

SymTensor3 SymTensor3::from_entries(Eigen::Index dim, std::vector<double> entries) {
  SymTensor3 t(dim);
  if (entries.size() != t.data_.size())
    throw ValidationError("SymTensor3: expected " + std::to_string(t.data_.size()) +
                          " entries, got " + std::to_string(entries.size()));
  t.data_ = std::move(entries);
  if (!t.is_symmetric(1e-12)) throw ValidationError("SymTensor3: entries are not symmetric");
  return t;
}

void SymTensor3::set(Eigen::Index i, Eigen::Index j, Eigen::Index k, double value) {
  data_[offset(i, j, k)] = value;
  data_[offset(i, k, j)] = value;
  data_[offset(j, i, k)] = value;
  data_[offset(j, k, i)] = value;
  data_[offset(k, i, j)] = value;
  data_[offset(k, j, i)] = value;
}

double SymTensor3::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool SymTensor3::is_symmetric(double rel_tol) const {
  const double tol = rel_tol * std::max(1.0, max_abs());
  bool ok = true;
  for_each_sorted_index(dim_, [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    const double v = data_[offset(i, j, k)];
    for (double w : {data_[offset(i, k, j)], data_[offset(j, i, k)], data_[offset(j, k, i)],
                     data_[offset(k, i, j)], data_[offset(k, j, i)]}) {
      if (!(std::abs(v - w) <= tol)) ok = false;
    }
  });
  return ok;
}

void SymTensor3::require_same_dim(const SymTensor3& other) const {
  if (other.dim_ != dim_) throw ValidationError("SymTensor3: dimension mismatch");
}

SymTensor3& SymTensor3::operator+=(const SymTensor3& other) {
  require_same_dim(other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SymTensor3& SymTensor3::operator-=(const SymTensor3& other) {
  require_same_dim(other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SymTensor3& SymTensor3::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

SymTensor3 outer3(const Eigen::VectorXd& v) {
  SymTensor3 t(v.size());
  for_each_sorted_index(v.size(), [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    t.set(i, j, k, v(i) * v(j) * v(k));
  });
  return t;
}

namespace {

void require_dim(const SymTensor3& m, const Eigen::VectorXd& v, const char* what) {
  if (v.size() != m.dim())
    throw ValidationError(std::string(what) + ": vector length " + std::to_string(v.size()) +
                          " does not match tensor dim " + std::to_string(m.dim()));
}

}  // namespace

double contract(const SymTensor3& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& c) {
  require_dim(m, a, "contract");
  require_dim(m, b, "contract");
  require_dim(m, c, "contract");
  const Eigen::Index d = m.dim();
  double total = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double inner = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) inner += m(i, j, k) * c(k);
      row += inner * b(j);
    }
    total += row * a(i);
  }
  return total;
}

Eigen::VectorXd contract_two(const SymTensor3& m, const Eigen::VectorXd& u) {
  require_dim(m, u, "contract_two");
  const Eigen::Index d = m.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double inner = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) inner += m(i, j, k) * u(k);
      s += inner * u(j);
    }
    out(i) = s;
  }
  return out;
}

SymTensor3 apply_matrix3(const SymTensor3& m, const Eigen::MatrixXd& v) {
  if (v.rows() != m.dim())
    throw ValidationError("apply_matrix3: matrix has " + std::to_string(v.rows()) +
                          " rows, tensor dim is " + std::to_string(m.dim()));
  const Eigen::Index d = m.dim();
  const Eigen::Index r = v.cols();
  // Contract one mode at a time: T1(a,j,k) = sum_i V(i,a) M(i,j,k), etc.
  std::vector<double> t1(static_cast<std::size_t>(r * d * d), 0.0);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index i = 0; i < d; ++i) {
      const double w = v(i, a);
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k) t1[(a * d + j) * d + k] += w * m(i, j, k);
    }
  std::vector<double> t2(static_cast<std::size_t>(r * r * d), 0.0);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b)
      for (Eigen::Index j = 0; j < d; ++j) {
        const double w = v(j, b);
        if (w == 0.0) continue;
        for (Eigen::Index k = 0; k < d; ++k) t2[(a * r + b) * d + k] += w * t1[(a * d + j) * d + k];
      }
  SymTensor3 out(r);
  for_each_sorted_index(r, [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) s += v(k, c) * t2[(a * r + b) * d + k];
    out.set(a, b, c, s);
  });
  return out;
}

std::optional<Eigen::VectorXd> power_update(const SymTensor3& m, const Eigen::VectorXd& u) {
  Eigen::VectorXd next = contract_two(m, u);
  const double norm = next.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
  return next / norm;
}

namespace {

// Runs `iters` power updates from `start`; nullopt if any update degenerates.
std::optional<Eigen::VectorXd> iterate(const SymTensor3& m, Eigen::VectorXd start,
                                       std::size_t iters) {
  for (std::size_t t = 0; t < iters; ++t) {
    auto next = power_update(m, start);
    if (!next) return std::nullopt;
    start = std::move(*next);
  }
  return start;
}

}  // namespace

double op_norm_estimate(const SymTensor3& m, std::size_t restarts, std::size_t iters,
                        std::uint64_t seed) {
  double best = 0.0;
  for (std::size_t l = 0; l < restarts; ++l) {
    Rng rng(derive_seed(seed, {l}));
    Eigen::VectorXd start = random_unit_vector(rng, m.dim());
    // A degenerate run still contributes its last evaluated point.
    Eigen::VectorXd u = start;
    for (std::size_t t = 0; t < iters; ++t) {
      auto next = power_update(m, u);
      if (!next) break;
      u = std::move(*next);
    }
    best = std::max(best, std::abs(contract(m, u, u, u)));
  }
  return best;
}

TensorFactor canonicalize_sign(TensorFactor f) {
  if (f.weight < 0.0) {
    f.weight = -f.weight;
    f.vector = -f.vector;
  }
  return f;
}

std::vector<TensorFactor> robust_tpm(const SymTensor3& m, std::size_t k, const TpmParams& params,
                                     std::uint64_t seed) {
  if (static_cast<Eigen::Index>(k) != m.dim())
    throw ValidationError("robust_tpm: K=" + std::to_string(k) + " but tensor dim is " +
                          std::to_string(m.dim()));
  if (params.n_iters < 1) throw ValidationError("robust_tpm: n_iters must be >= 1");
  const std::size_t restarts = params.n_restarts == 0 ? 20 * k : params.n_restarts;

  SymTensor3 residual = m;
  std::vector<TensorFactor> factors;
  factors.reserve(k);
  for (std::size_t round = 0; round < k; ++round) {
    std::optional<Eigen::VectorXd> best;
    double best_value = 0.0;
    for (std::size_t l = 0; l < restarts; ++l) {
      Rng rng(derive_seed(seed, {round, l}));
      auto end = iterate(residual, random_unit_vector(rng, residual.dim()), params.n_iters);
      if (!end) continue;
      const double value = contract(residual, *end, *end, *end);
      if (!best || value > best_value) {
        best = std::move(end);
        best_value = value;
      }
    }
    if (!best) throw DecompositionError(round);
    auto refined = iterate(residual, *best, params.n_iters);
    if (!refined) throw DecompositionError(round);

    TensorFactor f;
    f.vector = std::move(*refined);
    f.weight = contract(residual, f.vector, f.vector, f.vector);
    residual -= f.weight * outer3(f.vector);
    factors.push_back(std::move(f));
  }
  return factors;
}

}  // namespace mlds

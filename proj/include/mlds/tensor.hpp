#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mlds {

/// Dense symmetric third-order tensor over R^d.
///
/// Entries are stored as a full d^3 array in row-major (i, j, k) order. Every
/// mutating operation writes all permutations of an index triple with the same
/// value, so instances are exactly symmetric at all times.
class SymTensor3 {
 public:
  /// Zero tensor of the given dimension. Throws ValidationError if dim < 1.
  explicit SymTensor3(Eigen::Index dim);

  /// Builds a tensor from d^3 raw entries. Throws ValidationError when the
  /// entries are not symmetric to a relative tolerance of 1e-12.
  static SymTensor3 from_entries(Eigen::Index dim, std::vector<double> entries);

  Eigen::Index dim() const { return dim_; }

  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[offset(i, j, k)];
  }

  /// Assigns `value` to (i, j, k) and all its permutations.
  void set(Eigen::Index i, Eigen::Index j, Eigen::Index k, double value);

  std::span<const double> entries() const { return data_; }

  double max_abs() const;

  /// True if every entry matches its permutations to `rel_tol` relative to
  /// the largest entry magnitude.
  bool is_symmetric(double rel_tol = 1e-12) const;

  SymTensor3& operator+=(const SymTensor3& other);
  SymTensor3& operator-=(const SymTensor3& other);
  SymTensor3& operator*=(double s);

  friend SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
  friend SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
  friend SymTensor3 operator*(double s, SymTensor3 a) { return a *= s; }
  friend SymTensor3 operator*(SymTensor3 a, double s) { return a *= s; }

 private:
  std::size_t offset(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return static_cast<std::size_t>((i * dim_ + j) * dim_ + k);
  }
  void require_same_dim(const SymTensor3& other) const;

  Eigen::Index dim_;
  std::vector<double> data_;
};

/// Calls f(i, j, k) once for every sorted index triple i <= j <= k < dim.
template <typename F>
void for_each_sorted_index(Eigen::Index dim, F&& f) {
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = i; j < dim; ++j)
      for (Eigen::Index k = j; k < dim; ++k) f(i, j, k);
}

/// v (x) v (x) v.
SymTensor3 outer3(const Eigen::VectorXd& v);

/// M(a, b, c) = sum_{ijk} M_ijk a_i b_j c_k.
double contract(const SymTensor3& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& c);

/// M(I, u, u): component i is sum_{jk} M_ijk u_j u_k.
Eigen::VectorXd contract_two(const SymTensor3& m, const Eigen::VectorXd& u);

/// M(V, V, V) for a d x K matrix V; the result lives over R^K.
SymTensor3 apply_matrix3(const SymTensor3& m, const Eigen::MatrixXd& v);

/// One normalized power step M(I, u, u) / ||M(I, u, u)||. Returns nullopt when
/// the update vector has zero norm, which signals a degenerate start.
std::optional<Eigen::VectorXd> power_update(const SymTensor3& m, const Eigen::VectorXd& u);

/// Lower bound on sup_{|a|=1} |M(a, a, a)| from power iteration with random restarts.
double op_norm_estimate(const SymTensor3& m, std::size_t restarts, std::size_t iters,
                        std::uint64_t seed);

struct TensorFactor {
  double weight = 0.0;
  Eigen::VectorXd vector;
};

/// Flips the factor so that its weight is non-negative. For an odd-order tensor
/// lambda * v^3 = (-lambda) * (-v)^3, so the represented term is unchanged.
TensorFactor canonicalize_sign(TensorFactor f);

struct TpmParams {
  /// Random starts per round; 0 selects the default of 20 * K.
  std::size_t n_restarts = 0;
  /// Power updates per start, and again on the selected start.
  std::size_t n_iters = 100;
};

/// Robust tensor power method with restarts and deflation.
///
/// Each of the K rounds runs `n_iters` power updates from `n_restarts`
/// uniformly random unit vectors, keeps the start maximizing M(b, b, b) (ties
/// go to the lowest restart index), runs `n_iters` more updates on it, records
/// (M(b, b, b), b) and deflates M by that rank-one term. Factors are returned in
/// extraction order, with the weight's sign as extracted.
///
/// Restart seeds derive from (seed, round, restart), so results are
/// reproducible. Throws DecompositionError if every restart in a round hits a
/// zero update.
std::vector<TensorFactor> robust_tpm(const SymTensor3& m, std::size_t k, const TpmParams& params,
                                     std::uint64_t seed);

}  // namespace mlds

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mlds {

/// Single-output LTI system x+ = A x + B (u + w1), y = C x + w2 with zero feedthrough.
struct StateSpace {
  Eigen::MatrixXd a;     // n x n
  Eigen::MatrixXd b;     // n x m
  Eigen::RowVectorXd c;  // 1 x n

  Eigen::Index order() const { return a.rows(); }
  Eigen::Index input_dim() const { return b.cols(); }
  double spectral_radius() const;
  /// Throws ValidationError on inconsistent shapes.
  void validate() const;
};

/// Truncated impulse response (g(1)', ..., g(L)')' with g(t) in R^m.
struct MarkovVector {
  std::size_t horizon = 0;
  std::size_t input_dim = 0;
  Eigen::VectorXd values;

  MarkovVector() = default;
  MarkovVector(std::size_t l, std::size_t m, Eigen::VectorXd v);

  /// g(t) for t in 1..L.
  Eigen::VectorXd block(std::size_t t) const {
    return values.segment(static_cast<Eigen::Index>((t - 1) * input_dim),
                          static_cast<Eigen::Index>(input_dim));
  }
};

struct NoiseConfig {
  double sigma_u = 1.0;
  double sigma_w1 = 0.01;
  double sigma_w2 = 0.01;

  void validate() const;
};

struct MixtureComponent {
  double weight = 0.0;
  StateSpace system;
};

/// K strictly stable systems with mixing weights summing to one.
class MixtureModel {
 public:
  /// Throws ValidationError unless weights sum to 1 (1e-12), every weight is at
  /// least `min_weight`, all systems share (n, m) and are strictly stable.
  explicit MixtureModel(std::vector<MixtureComponent> components, double min_weight = 1e-12);

  std::size_t size() const { return components_.size(); }
  const MixtureComponent& operator[](std::size_t k) const { return components_[k]; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  Eigen::Index order() const { return components_.front().system.order(); }
  Eigen::Index input_dim() const { return components_.front().system.input_dim(); }

  Eigen::VectorXd weights() const;
  std::vector<MarkovVector> markov_vectors(std::size_t horizon) const;
  /// sum_k p_k g_k g_k' over the first `horizon` Markov parameters.
  Eigen::MatrixXd second_moment(std::size_t horizon) const;
  /// K-th largest singular value of second_moment(horizon).
  double sigma_k(std::size_t horizon) const;

 private:
  std::vector<MixtureComponent> components_;
};

/// One trajectory: inputs u_0..u_{T-1} (row t of `inputs`) and outputs
/// y_1..y_T (entry t-1 of `outputs`).
struct Trajectory {
  Eigen::MatrixXd inputs;   // T x m
  Eigen::VectorXd outputs;  // T
  std::optional<std::size_t> label;

  std::size_t length() const { return static_cast<std::size_t>(outputs.size()); }
};

struct TrajectoryDataset {
  std::size_t horizon_t = 0;  // T
  std::size_t input_dim = 0;  // m
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  bool labeled() const;
  /// Throws ValidationError unless every trajectory has shape (T, m).
  void validate() const;
};

/// A with i.i.d. N(0,1) entries rescaled to the requested spectral radius; B, C i.i.d. N(0,1).
StateSpace random_stable_system(std::size_t n, std::size_t m, double target_radius,
                                std::uint64_t seed);

/// Block t of the result is (C A^{t-1} B)'.
MarkovVector impulse_response(const StateSpace& ss, std::size_t horizon);

/// 1 + sum_t ||g(t)||^2, summed until a geometric tail estimate drops below
/// `tail_tol`. Throws Error if not converged within 10^6 terms.
double system_energy(const StateSpace& ss, double tail_tol = 1e-12);

/// N i.i.d. categorical draws from `weights`.
std::vector<std::size_t> sample_mixture(const Eigen::VectorXd& weights, std::size_t n,
                                        std::uint64_t seed);

/// Rolls out T steps from x_0 = 0 with Gaussian input, process and measurement noise.
Trajectory rollout(const StateSpace& ss, std::size_t t, const NoiseConfig& noise,
                   std::uint64_t seed);

/// Noiseless response to a given input sequence (row t = u_t), x_0 = 0.
/// Entry t-1 of the result is y_t.
Eigen::VectorXd simulate(const StateSpace& ss, const Eigen::MatrixXd& inputs);

/// Labels from sample_mixture, trajectory i from rollout with a seed derived from (seed, i).
TrajectoryDataset generate_dataset(const MixtureModel& model, std::size_t n, std::size_t t,
                                   const NoiseConfig& noise, std::uint64_t seed);

struct MixtureSpec {
  std::size_t k = 3;
  std::size_t n = 3;
  std::size_t m = 1;
  double radius_min = 0.6;
  double radius_max = 0.9;
  /// Horizon at which non-degeneracy of the second moment is checked.
  std::size_t horizon = 7;
  double min_sigma_k = 1e-8;
  std::size_t max_attempts = 20;

  void validate() const;
};

/// Equal-weight mixture of random stable systems with radii uniform in
/// [radius_min, radius_max]. Redraws the whole mixture when sigma_K of the
/// second moment falls below `min_sigma_k`; throws DegenerateMixtureError after
/// `max_attempts` draws.
MixtureModel random_mixture(const MixtureSpec& spec, std::uint64_t seed);

}  // namespace mlds

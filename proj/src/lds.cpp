#include "mlds/lds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mlds/errors.hpp"
#include "mlds/random.hpp"

namespace mlds {

double StateSpace::spectral_radius() const {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void StateSpace::validate() const {
  const Eigen::Index n = a.rows();
  if (n < 1 || a.cols() != n) throw ValidationError("StateSpace: A must be square with n >= 1");
  if (b.rows() != n || b.cols() < 1) throw ValidationError("StateSpace: B must be n x m, m >= 1");
  if (c.size() != n) throw ValidationError("StateSpace: C must be 1 x n");
}

MarkovVector::MarkovVector(std::size_t l, std::size_t m, Eigen::VectorXd v)
    : horizon(l), input_dim(m), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != l * m)
    throw ValidationError("MarkovVector: length " + std::to_string(values.size()) +
                          " != L*m = " + std::to_string(l * m));
}

void NoiseConfig::validate() const {
  if (!(sigma_u > 0.0)) throw ValidationError("noise: sigma_u must be > 0");
  if (!(sigma_w1 >= 0.0) || !(sigma_w2 >= 0.0))
    throw ValidationError("noise: sigma_w1 and sigma_w2 must be >= 0");
}

MixtureModel::MixtureModel(std::vector<MixtureComponent> components, double min_weight)
    : components_(std::move(components)) {
  if (components_.empty()) throw ValidationError("mixture: K must be >= 1");
  double total = 0.0;
  for (const auto& c : components_) {
    c.system.validate();
    if (c.system.order() != components_.front().system.order() ||
        c.system.input_dim() != components_.front().system.input_dim())
      throw ValidationError("mixture: components must share (n, m)");
    if (!(c.weight >= min_weight) || !(c.weight > 0.0))
      throw ValidationError("mixture: weight " + std::to_string(c.weight) + " below minimum");
    if (!(c.system.spectral_radius() < 1.0))
      throw ValidationError("mixture: component is not strictly stable");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("mixture: weights sum to " + std::to_string(total));
}

Eigen::VectorXd MixtureModel::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t k = 0; k < components_.size(); ++k)
    w(static_cast<Eigen::Index>(k)) = components_[k].weight;
  return w;
}

std::vector<MarkovVector> MixtureModel::markov_vectors(std::size_t horizon) const {
  std::vector<MarkovVector> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(impulse_response(c.system, horizon));
  return out;
}

Eigen::MatrixXd MixtureModel::second_moment(std::size_t horizon) const {
  const auto g = markov_vectors(horizon);
  const Eigen::Index d = g.front().values.size();
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < g.size(); ++k)
    m2 += components_[k].weight * g[k].values * g[k].values.transpose();
  return m2;
}

double MixtureModel::sigma_k(std::size_t horizon) const {
  const Eigen::MatrixXd m2 = second_moment(horizon);
  const auto k = static_cast<Eigen::Index>(components_.size());
  if (k > m2.rows()) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m2);
  return svd.singularValues()(k - 1);
}

bool TrajectoryDataset::labeled() const {
  return !trajectories.empty() &&
         std::all_of(trajectories.begin(), trajectories.end(),
                     [](const Trajectory& t) { return t.label.has_value(); });
}

void TrajectoryDataset::validate() const {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& tr = trajectories[i];
    if (static_cast<std::size_t>(tr.inputs.rows()) != horizon_t ||
        static_cast<std::size_t>(tr.inputs.cols()) != input_dim || tr.length() != horizon_t)
      throw ValidationError("dataset: trajectory " + std::to_string(i) +
                            " does not have shape (T, m)");
  }
}

StateSpace random_stable_system(std::size_t n, std::size_t m, double target_radius,
                                std::uint64_t seed) {
  if (n < 1 || m < 1) throw ValidationError("random_stable_system: n and m must be >= 1");
  if (!(target_radius > 0.0 && target_radius < 1.0))
    throw ValidationError("random_stable_system: target radius must lie in (0, 1)");
  Rng rng(seed);
  const auto ni = static_cast<Eigen::Index>(n);
  for (int attempt = 0; attempt < 10; ++attempt) {
    StateSpace ss;
    ss.a = gaussian_matrix(rng, ni, ni);
    const double rho = ss.spectral_radius();
    if (!(rho > std::numeric_limits<double>::min()) || !std::isfinite(rho)) continue;
    if (n == 1)
      ss.a(0, 0) = std::copysign(target_radius, ss.a(0, 0));
    else
      ss.a *= target_radius / rho;
    ss.b = gaussian_matrix(rng, ni, static_cast<Eigen::Index>(m));
    ss.c = gaussian_matrix(rng, 1, ni);
    return ss;
  }
  throw Error("random_stable_system: drew a zero-radius A matrix 10 times");
}

MarkovVector impulse_response(const StateSpace& ss, std::size_t horizon) {
  if (horizon < 1) throw ValidationError("impulse_response: L must be >= 1");
  ss.validate();
  const auto m = static_cast<std::size_t>(ss.input_dim());
  Eigen::VectorXd values(static_cast<Eigen::Index>(horizon * m));
  Eigen::MatrixXd power_b = ss.b;  // A^{t-1} B
  for (std::size_t t = 0; t < horizon; ++t) {
    values.segment(static_cast<Eigen::Index>(t * m), static_cast<Eigen::Index>(m)) =
        (ss.c * power_b).transpose();
    power_b = ss.a * power_b;
  }
  return MarkovVector(horizon, m, std::move(values));
}

double system_energy(const StateSpace& ss, double tail_tol) {
  ss.validate();
  if (!(tail_tol > 0.0)) throw ValidationError("system_energy: tail_tol must be > 0");
  // Tail of sum ||C X_t||^2 is bounded by ||C||^2 * sum_{s>t} ||X_s||_F^2, with
  // X_t = A^{t-1} B; the state tail is extrapolated geometrically from the
  // largest recent decay ratio.
  constexpr std::size_t kMaxTerms = 1'000'000;
  constexpr std::size_t kWindow = 8;
  const double c_norm2 = ss.c.squaredNorm();
  double energy = 1.0;
  Eigen::MatrixXd x = ss.b;
  std::vector<double> ratios;
  double prev_state = -1.0;
  for (std::size_t t = 1; t <= kMaxTerms; ++t) {
    energy += (ss.c * x).squaredNorm();
    const double state = x.squaredNorm();
    if (state == 0.0 || c_norm2 == 0.0) return energy;
    if (prev_state > 0.0) {
      ratios.push_back(state / prev_state);
      if (ratios.size() > kWindow) ratios.erase(ratios.begin());
    }
    prev_state = state;
    if (ratios.size() == kWindow) {
      const double r = *std::max_element(ratios.begin(), ratios.end());
      if (r < 1.0 && c_norm2 * state * r / (1.0 - r) < tail_tol) return energy;
    }
    x = ss.a * x;
  }
  throw Error("system_energy: no convergence within 1e6 terms (near-unstable system)");
}

std::vector<std::size_t> sample_mixture(const Eigen::VectorXd& weights, std::size_t n,
                                        std::uint64_t seed) {
  if (weights.size() < 1) throw ValidationError("sample_mixture: empty weight vector");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> dist(weights.data(), weights.data() + weights.size());
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = dist(rng);
  return labels;
}

Trajectory rollout(const StateSpace& ss, std::size_t t, const NoiseConfig& noise,
                   std::uint64_t seed) {
  if (t < 1) throw ValidationError("rollout: T must be >= 1");
  ss.validate();
  if (!(noise.sigma_u >= 0.0) || !(noise.sigma_w1 >= 0.0) || !(noise.sigma_w2 >= 0.0))
    throw ValidationError("rollout: noise levels must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index m = ss.input_dim();
  const auto steps = static_cast<Eigen::Index>(t);
  Trajectory tr;
  tr.inputs.resize(steps, m);
  tr.outputs.resize(steps);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ss.order());
  Eigen::VectorXd drive(m);
  for (Eigen::Index s = 0; s < steps; ++s) {
    for (Eigen::Index j = 0; j < m; ++j) tr.inputs(s, j) = noise.sigma_u * normal(rng);
    for (Eigen::Index j = 0; j < m; ++j) drive(j) = tr.inputs(s, j) + noise.sigma_w1 * normal(rng);
    const double w2 = noise.sigma_w2 * normal(rng);
    x = ss.a * x + ss.b * drive;
    tr.outputs(s) = ss.c.dot(x) + w2;
  }
  return tr;
}

Eigen::VectorXd simulate(const StateSpace& ss, const Eigen::MatrixXd& inputs) {
  ss.validate();
  if (inputs.cols() != ss.input_dim()) throw ValidationError("simulate: input dimension mismatch");
  Eigen::VectorXd y(inputs.rows());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ss.order());
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    x = ss.a * x + ss.b * inputs.row(t).transpose();
    y(t) = ss.c.dot(x);
  }
  return y;
}

TrajectoryDataset generate_dataset(const MixtureModel& model, std::size_t n, std::size_t t,
                                   const NoiseConfig& noise, std::uint64_t seed) {
  if (n < 1 || t < 1) throw ValidationError("generate_dataset: N and T must be >= 1");
  noise.validate();
  const auto labels = sample_mixture(model.weights(), n, derive_seed(seed, {0}));
  TrajectoryDataset ds;
  ds.horizon_t = t;
  ds.input_dim = static_cast<std::size_t>(model.input_dim());
  ds.trajectories.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory tr = rollout(model[labels[i]].system, t, noise, derive_seed(seed, {1, i}));
    tr.label = labels[i];
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

void MixtureSpec::validate() const {
  if (k < 1) throw ValidationError("K must be >= 1");
  if (n < 1) throw ValidationError("n must be >= 1");
  if (m < 1) throw ValidationError("m must be >= 1");
  if (!(radius_min > 0.0 && radius_min <= radius_max && radius_max < 1.0))
    throw ValidationError("radii must satisfy 0 < radius-min <= radius-max < 1");
  if (horizon < 1) throw ValidationError("L must be >= 1");
  if (k > horizon * m) throw ValidationError("K must not exceed L*m");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

MixtureModel random_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  double last_sigma = 0.0;
  for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<MixtureComponent> comps;
    for (std::size_t k = 0; k < spec.k; ++k) {
      Rng rng(derive_seed(seed, {attempt, k, 0}));
      std::uniform_real_distribution<double> radius(spec.radius_min, spec.radius_max);
      const double r = spec.radius_min == spec.radius_max ? spec.radius_min : radius(rng);
      comps.push_back({1.0 / static_cast<double>(spec.k),
                       random_stable_system(spec.n, spec.m, r, derive_seed(seed, {attempt, k, 1}))});
    }
    // Equal weights may sum to 1 +- a few ulp; put the rounding on the last one.
    double head = 0.0;
    for (std::size_t k = 0; k + 1 < spec.k; ++k) head += comps[k].weight;
    comps.back().weight = 1.0 - head;
    MixtureModel model(std::move(comps));
    last_sigma = model.sigma_k(spec.horizon);
    if (last_sigma >= spec.min_sigma_k) return model;
  }
  throw DegenerateMixtureError(last_sigma, "random_mixture gave up after " +
                                               std::to_string(spec.max_attempts) + " attempts");
}

}  // namespace mlds

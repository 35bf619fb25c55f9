#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlds/lds.hpp"
#include "mlds/pipeline.hpp"
#include "mlds/tensor.hpp"

namespace mlds {

struct MatchResult {
  /// permutation[k] is the estimate index matched to true component k.
  std::vector<std::size_t> permutation;
  Eigen::VectorXd component_errors;  // ||g_hat_{pi(k)} - g_k||
  Eigen::VectorXd weight_errors;     // |p_hat_{pi(k)} - p_k|
  double mean_error = 0.0;
  double mean_weight_error = 0.0;
};

/// Largest K accepted by the brute-force matcher.
inline constexpr std::size_t kMaxMatchComponents = 8;

/// Brute force over all K! permutations, minimizing the summed component error.
/// Ties keep the lexicographically first permutation.
MatchResult match_components(const std::vector<Eigen::VectorXd>& estimated,
                             const Eigen::VectorXd& estimated_weights,
                             const std::vector<Eigen::VectorXd>& truth,
                             const Eigen::VectorXd& truth_weights);

MatchResult match_components(const MarkovEstimate& est, const MixtureModel& truth,
                             std::size_t horizon);

/// Mean over trajectories of ||g_{k_i} - g_hat_i|| with g_hat_i from ols_markov.
double baseline_error(const TrajectoryDataset& data, const MixtureModel& truth,
                      std::size_t horizon);

enum class Method { kTensor, kTensorRefine, kBaseline };

std::string to_string(Method m);
/// Accepts "tensor", "tensor+refine" and "baseline".
Method parse_method(const std::string& s);

struct SweepConfig {
  std::vector<std::size_t> ns{100, 1000};
  std::vector<std::size_t> ts{96};
  std::vector<Method> methods{Method::kTensor, Method::kBaseline};
  std::vector<std::uint64_t> seeds{0};
  MixtureSpec mixture;  // mixture.horizon doubles as the estimation horizon L
  NoiseConfig noise;
  TpmParams tpm;
  /// When false, wall_ms is written as 0 so that output bytes depend only on the config.
  bool record_timing = true;
  /// Worker threads; 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;

  void validate() const;
};

struct SweepRecord {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t k = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  Method method = Method::kTensor;
  double error = 0.0;         // NaN for failed runs
  double weight_error = 0.0;  // NaN for failed runs and for the baseline
  double wall_ms = 0.0;
  std::string status = "ok";  // ok | degenerate | decomposition_failure | error

  bool ok() const { return status == "ok"; }
};

/// One (N, T, seed) cell: the mixture is drawn from the seed alone, so cells that
/// share a seed share the true systems; the dataset and decomposition seeds
/// also depend on (N, T). Failures are recorded, never thrown.
std::vector<SweepRecord> run_sweep_cell(const SweepConfig& config, std::size_t n, std::size_t t,
                                        std::uint64_t seed);

/// All cells, possibly in parallel; output sorted by (N, T, seed, method).
std::vector<SweepRecord> run_sweep(const SweepConfig& config);

struct CellSummary {
  std::size_t n = 0;
  std::size_t t = 0;
  Method method = Method::kTensor;
  double median = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

/// Aggregates successful records per (N, T, method); failed runs only count.
std::vector<CellSummary> summarize(const std::vector<SweepRecord>& records);

double median(std::vector<double> values);

/// Header `N,T,K,L,seed,method,error,weight_error,wall_ms,status`; floats with 9 significant digits.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records);
std::vector<SweepRecord> read_sweep_csv(std::istream& is);

/// Error-vs-N series: one block per T, each headed `# T=<T>`, with columns
/// `N method median mean stderr n_ok n_failed`.
void write_series(std::ostream& os, const std::vector<CellSummary>& summaries);

/// Level-set grid for one method: columns `N T median_error`, one line per cell.
void write_level_grid(std::ostream& os, const std::vector<CellSummary>& summaries, Method method);

}  // namespace mlds

#include "mlds/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "mlds/errors.hpp"
#include "mlds/io.hpp"
#include "mlds/random.hpp"

namespace mlds {

MatchResult match_components(const std::vector<Eigen::VectorXd>& estimated,
                             const Eigen::VectorXd& estimated_weights,
                             const std::vector<Eigen::VectorXd>& truth,
                             const Eigen::VectorXd& truth_weights) {
  const std::size_t k = truth.size();
  if (estimated.size() != k) throw ValidationError("match: K mismatch between estimate and truth");
  if (k == 0) throw ValidationError("match: empty mixture");
  if (k > kMaxMatchComponents)
    throw ValidationError("match: K=" + std::to_string(k) + " exceeds brute-force cap of " +
                          std::to_string(kMaxMatchComponents));
  if (static_cast<std::size_t>(estimated_weights.size()) != k ||
      static_cast<std::size_t>(truth_weights.size()) != k)
    throw ValidationError("match: weight vector length mismatch");

  Eigen::MatrixXd cost(k, k);  // cost(true, est)
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (estimated[b].size() != truth[a].size()) throw ValidationError("match: length mismatch");
      cost(a, b) = (estimated[b] - truth[a]).norm();
    }

  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t a = 0; a < k; ++a) c += cost(a, perm[a]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  MatchResult r;
  r.permutation = best;
  r.component_errors.resize(k);
  r.weight_errors.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    r.component_errors(ai) = cost(a, best[a]);
    r.weight_errors(ai) =
        std::abs(estimated_weights(static_cast<Eigen::Index>(best[a])) - truth_weights(ai));
  }
  r.mean_error = r.component_errors.mean();
  r.mean_weight_error = r.weight_errors.mean();
  return r;
}

MatchResult match_components(const MarkovEstimate& est, const MixtureModel& truth,
                             std::size_t horizon) {
  std::vector<Eigen::VectorXd> estimated, reference;
  for (const auto& g : est.components) estimated.push_back(g.values);
  for (const auto& g : truth.markov_vectors(horizon)) reference.push_back(g.values);
  return match_components(estimated, est.weights, reference, truth.weights());
}

double baseline_error(const TrajectoryDataset& data, const MixtureModel& truth,
                      std::size_t horizon) {
  if (!data.labeled()) throw ValidationError("baseline_error: dataset has no labels");
  const auto g = truth.markov_vectors(horizon);
  double total = 0.0;
  for (const auto& tr : data.trajectories) {
    if (*tr.label >= g.size()) throw ValidationError("baseline_error: label out of range");
    total += (ols_markov(tr, horizon).markov.values - g[*tr.label].values).norm();
  }
  return total / static_cast<double>(data.size());
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kTensor: return "tensor";
    case Method::kTensorRefine: return "tensor+refine";
    case Method::kBaseline: return "baseline";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "tensor") return Method::kTensor;
  if (s == "tensor+refine") return Method::kTensorRefine;
  if (s == "baseline") return Method::kBaseline;
  throw ValidationError("unknown method '" + s + "'");
}

void SweepConfig::validate() const {
  if (ns.empty() || ts.empty() || methods.empty() || seeds.empty())
    throw ValidationError("sweep: N, T, methods and seeds must be nonempty");
  mixture.validate();
  noise.validate();
  if (tpm.n_iters < 1) throw ValidationError("sweep: iters must be >= 1");
  if (mixture.k > kMaxMatchComponents) throw ValidationError("sweep: K too large for matching");
  for (std::size_t n : ns)
    if (n < 2) throw ValidationError("sweep: every N must be >= 2");
  for (std::size_t t : ts)
    if (t < mixture.horizon) throw InsufficientLengthError(t, mixture.horizon);
}

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string status_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const DegenerateMixtureError&) {
    return "degenerate";
  } catch (const DecompositionError&) {
    return "decomposition_failure";
  } catch (...) {
    return "error";
  }
}

}  // namespace

std::vector<SweepRecord> run_sweep_cell(const SweepConfig& config, std::size_t n, std::size_t t,
                                        std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  const std::size_t horizon = config.mixture.horizon;
  auto blank = [&](Method m) {
    SweepRecord r;
    r.n = n;
    r.t = t;
    r.k = config.mixture.k;
    r.horizon = horizon;
    r.seed = seed;
    r.method = m;
    return r;
  };

  std::vector<SweepRecord> out;
  std::optional<MixtureModel> model;
  std::optional<TrajectoryDataset> data;
  std::string setup_status;
  try {
    model.emplace(random_mixture(config.mixture, derive_seed(seed, {0})));
    data.emplace(generate_dataset(*model, n, t, config.noise, derive_seed(seed, {1, n, t})));
  } catch (...) {
    setup_status = status_for(std::current_exception());
  }

  for (Method m : config.methods) {
    SweepRecord r = blank(m);
    if (!setup_status.empty()) {
      r.error = r.weight_error = kNaN;
      r.status = setup_status;
      out.push_back(r);
      continue;
    }
    const auto start = Clock::now();
    try {
      if (m == Method::kBaseline) {
        r.error = baseline_error(*data, *model, horizon);
        r.weight_error = kNaN;
      } else {
        FitOptions opt;
        opt.horizon = horizon;
        opt.k = config.mixture.k;
        opt.sigma_u = config.noise.sigma_u;
        opt.tpm = config.tpm;
        opt.seed = derive_seed(seed, {2, n, t});
        const MarkovEstimate est =
            m == Method::kTensor ? mlds_fit(*data, opt) : mlds_fit_refined(*data, opt);
        const MatchResult match = match_components(est, *model, horizon);
        r.error = match.mean_error;
        r.weight_error = match.mean_weight_error;
      }
    } catch (...) {
      r.error = r.weight_error = kNaN;
      r.status = status_for(std::current_exception());
    }
    if (config.record_timing)
      r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.push_back(r);
  }
  return out;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  config.validate();
  struct Cell {
    std::size_t n, t;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t n : config.ns)
    for (std::size_t t : config.ts)
      for (std::uint64_t s : config.seeds) cells.push_back({n, t, s});

  std::vector<std::vector<SweepRecord>> results(cells.size());
  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();)
      results[i] = run_sweep_cell(config, cells[i].n, cells[i].t, cells[i].seed);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<SweepRecord> records;
  for (auto& r : results) records.insert(records.end(), r.begin(), r.end());
  std::stable_sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    return std::tie(a.n, a.t, a.seed, a.method) < std::tie(b.n, b.t, b.seed, b.method);
  });
  return records;
}

double median(std::vector<double> values) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<CellSummary> summarize(const std::vector<SweepRecord>& records) {
  std::map<std::tuple<std::size_t, std::size_t, Method>, std::vector<const SweepRecord*>> groups;
  for (const auto& r : records) groups[{r.n, r.t, r.method}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, group] : groups) {
    CellSummary s;
    std::tie(s.n, s.t, s.method) = key;
    std::vector<double> errors;
    for (const SweepRecord* r : group) {
      if (r->ok())
        errors.push_back(r->error);
      else
        ++s.n_failed;
    }
    s.n_ok = errors.size();
    s.median = median(errors);
    if (errors.empty()) {
      s.mean = s.stderr_mean = kNaN;
    } else {
      s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
      double ss = 0.0;
      for (double e : errors) ss += (e - s.mean) * (e - s.mean);
      s.stderr_mean = errors.size() > 1
                          ? std::sqrt(ss / static_cast<double>(errors.size() - 1)) /
                                std::sqrt(static_cast<double>(errors.size()))
                          : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  os << "N,T,K,L,seed,method,error,weight_error,wall_ms,status\n";
  for (const auto& r : records) {
    os << r.n << ',' << r.t << ',' << r.k << ',' << r.horizon << ',' << r.seed << ','
       << to_string(r.method) << ',' << format_double(r.error, 9) << ','
       << format_double(r.weight_error, 9) << ',' << format_double(r.wall_ms, 9) << ','
       << r.status << '\n';
  }
}

std::vector<SweepRecord> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "N,T,K,L,seed,method,error,weight_error,wall_ms,status")
    throw IoError("sweep csv: bad header");
  std::vector<SweepRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw IoError("sweep csv: expected 10 columns in '" + line + "'");
    SweepRecord r;
    try {
      r.n = std::stoull(f[0]);
      r.t = std::stoull(f[1]);
      r.k = std::stoull(f[2]);
      r.horizon = std::stoull(f[3]);
      r.seed = std::stoull(f[4]);
      r.method = parse_method(f[5]);
      r.error = std::strtod(f[6].c_str(), nullptr);
      r.weight_error = std::strtod(f[7].c_str(), nullptr);
      r.wall_ms = std::strtod(f[8].c_str(), nullptr);
    } catch (const std::exception& e) {
      throw IoError("sweep csv: bad row '" + line + "': " + e.what());
    }
    r.status = f[9];
    out.push_back(r);
  }
  return out;
}

void write_series(std::ostream& os, const std::vector<CellSummary>& summaries) {
  std::vector<std::size_t> ts;
  for (const auto& s : summaries) ts.push_back(s.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  for (std::size_t t : ts) {
    os << "# T=" << t << '\n';
    os << "N method median mean stderr n_ok n_failed\n";
    for (const auto& s : summaries) {
      if (s.t != t) continue;
      os << s.n << ' ' << to_string(s.method) << ' ' << format_double(s.median, 9) << ' '
         << format_double(s.mean, 9) << ' ' << format_double(s.stderr_mean, 9) << ' ' << s.n_ok
         << ' ' << s.n_failed << '\n';
    }
    os << '\n';
  }
}

void write_level_grid(std::ostream& os, const std::vector<CellSummary>& summaries, Method method) {
  os << "# method=" << to_string(method) << '\n';
  os << "N T median_error\n";
  for (const auto& s : summaries)
    if (s.method == method) os << s.n << ' ' << s.t << ' ' << format_double(s.median, 9) << '\n';
}

}  // namespace mlds

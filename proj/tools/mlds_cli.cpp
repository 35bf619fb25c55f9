// mlds: simulate, fit, evaluate and sweep mixtures of linear dynamical systems.
//
// Exit codes: 0 success, 2 validation, 3 degenerate mixture,
// 4 decomposition failure, 5 I/O, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlds/config.hpp"
#include "mlds/errors.hpp"
#include "mlds/eval.hpp"
#include "mlds/io.hpp"
#include "mlds/lds.hpp"
#include "mlds/pipeline.hpp"
#include "mlds/random.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kValidation = 2,
  kDegenerate = 3,
  kDecomposition = 4,
  kIo = 5,
};

// Collects flags that were actually given so they can override config-file values.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  void option(const std::string& key, const std::string& help) {
    app_->add_option("--" + key, values_[key], help);
  }
  void positional(const std::string& key, const std::string& help) {
    app_->add_option(key, values_[key], help);
  }
  void flag(const std::string& key, const std::string& help) {
    app_->add_flag("--" + key, flags_[key], help);
  }

  mlds::Settings settings() const {
    mlds::Settings s;
    if (const auto it = values_.find("config"); it != values_.end() && !it->second.empty()) {
      s = mlds::read_file(it->second, [](std::istream& in) { return mlds::parse_settings(in); });
    }
    for (const auto& [key, value] : values_) {
      if (key == "config") continue;
      const CLI::Option* opt = find(key);
      if (opt && opt->count() > 0) s[key] = value;
    }
    for (const auto& [key, set] : flags_)
      if (find(key)->count() > 0) s[key] = set ? "1" : "0";
    return s;
  }

 private:
  const CLI::Option* find(const std::string& key) const {
    for (const std::string name : {"--" + key, key}) {
      try {
        return app_->get_option(name);
      } catch (const CLI::OptionNotFound&) {
      }
    }
    return nullptr;
  }

  CLI::App* app_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
};

void add_mixture_flags(FlagSet& f) {
  f.option("K", "number of mixture components");
  f.option("n", "state dimension of each system");
  f.option("m", "input dimension");
  f.option("L", "number of Markov parameters (horizon)");
  f.option("radius-min", "smallest spectral radius");
  f.option("radius-max", "largest spectral radius");
}

void add_noise_flags(FlagSet& f) {
  f.option("sigma-u", "input standard deviation");
  f.option("sigma-w1", "process noise standard deviation");
  f.option("sigma-w2", "measurement noise standard deviation");
}

int cmd_simulate(const mlds::Settings& s) {
  const mlds::SimulateConfig c = mlds::simulate_config(s);
  const mlds::MixtureModel model = mlds::random_mixture(c.mixture, mlds::derive_seed(c.seed, {0}));
  const mlds::TrajectoryDataset data =
      mlds::generate_dataset(model, c.n, c.t, c.noise, mlds::derive_seed(c.seed, {1}));
  mlds::write_file_atomic(c.out + ".mixture",
                          [&](std::ostream& os) { mlds::write_mixture(os, model); });
  mlds::write_file_atomic(c.out + ".dataset",
                          [&](std::ostream& os) { mlds::write_dataset(os, data); });
  std::cout << "wrote " << c.out << ".mixture (K=" << model.size() << ", n=" << model.order()
            << ", m=" << model.input_dim() << ") and " << c.out << ".dataset (N=" << c.n
            << ", T=" << c.t << ")\n";
  std::cout << "sigma_K(M2) at L=" << c.mixture.horizon << ": "
            << mlds::format_double(model.sigma_k(c.mixture.horizon), 6) << '\n';
  for (std::size_t k = 0; k < model.size(); ++k)
    std::cout << "component " << k << ": spectral radius "
              << mlds::format_double(model[k].system.spectral_radius(), 6) << '\n';
  return kOk;
}

int cmd_fit(const mlds::Settings& s) {
  const mlds::FitConfig c = mlds::fit_config(s);
  const mlds::TrajectoryDataset data =
      mlds::read_file(c.dataset, [](std::istream& in) { return mlds::read_dataset(in); });
  mlds::FitOptions opt;
  opt.horizon = c.horizon;
  opt.k = c.k;
  opt.sigma_u = c.sigma_u;
  opt.tpm = c.tpm;
  opt.seed = c.seed;
  mlds::MarkovEstimate est = c.refine ? mlds::mlds_fit_refined(data, opt) : mlds::mlds_fit(data, opt);
  if (c.ho_kalman > 0) {
    for (std::size_t k = 0; k < est.size(); ++k) {
      const mlds::HoKalmanResult hk = mlds::ho_kalman(est.components[k], c.ho_kalman);
      if (hk.order_mismatch)
        std::cerr << "warning: component " << k << ": Hankel spectrum does not match order "
                  << c.ho_kalman << '\n';
      est.realizations.push_back(hk.system);
    }
  }
  mlds::write_file_atomic(c.out, [&](std::ostream& os) { mlds::write_estimate(os, est); });
  if (est.low_confidence)
    std::cerr << "warning: non-positive decomposition weight; estimate is low confidence\n";
  if (est.refine_rank_deficient)
    std::cerr << "warning: coefficients rank deficient; refinement skipped\n";
  std::cout << "wrote " << c.out << " (K=" << est.size() << ", L=" << c.horizon << ")\n";
  for (std::size_t k = 0; k < est.size(); ++k)
    std::cout << "component " << k << ": weight "
              << mlds::format_double(est.weights(static_cast<Eigen::Index>(k)), 6) << '\n';
  return kOk;
}

int cmd_eval(const mlds::Settings& s) {
  const mlds::EvalConfig c = mlds::eval_config(s);
  const mlds::MarkovEstimate est =
      mlds::read_file(c.estimate, [](std::istream& in) { return mlds::read_estimate(in); });
  const mlds::MixtureModel truth =
      mlds::read_file(c.mixture, [](std::istream& in) { return mlds::read_mixture(in); });
  if (est.size() != truth.size())
    throw mlds::ValidationError("eval: estimate has K=" + std::to_string(est.size()) +
                                " but mixture has K=" + std::to_string(truth.size()));
  const std::size_t horizon = est.components.front().horizon;
  if (c.horizon != 0 && c.horizon != horizon)
    throw mlds::ValidationError("eval: --L " + std::to_string(c.horizon) +
                                " does not match the estimate's L=" + std::to_string(horizon));
  if (static_cast<Eigen::Index>(est.components.front().input_dim) != truth.input_dim())
    throw mlds::ValidationError("eval: input dimension mismatch");
  const mlds::MatchResult r = mlds::match_components(est, truth, horizon);

  std::cout << "permutation:";
  for (std::size_t k = 0; k < r.permutation.size(); ++k)
    std::cout << ' ' << k << "->" << r.permutation[k];
  std::cout << '\n';
  for (std::size_t k = 0; k < r.permutation.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    std::cout << "component " << k << ": error " << mlds::format_double(r.component_errors(ki), 9)
              << " weight_error " << mlds::format_double(r.weight_errors(ki), 9) << '\n';
  }
  std::cout << "mean_error " << mlds::format_double(r.mean_error, 9) << '\n';
  std::cout << "mean_weight_error " << mlds::format_double(r.mean_weight_error, 9) << '\n';

  if (!c.csv.empty()) {
    const bool fresh = !std::filesystem::exists(c.csv);
    std::ofstream out(c.csv, std::ios::app);
    if (!out) throw mlds::IoError("cannot open '" + c.csv + "' for appending");
    if (fresh) out << "estimate,mixture,K,L,mean_error,mean_weight_error\n";
    out << c.estimate << ',' << c.mixture << ',' << est.size() << ',' << horizon << ','
        << mlds::format_double(r.mean_error, 9) << ',' << mlds::format_double(r.mean_weight_error, 9)
        << '\n';
    if (!out) throw mlds::IoError("write to '" + c.csv + "' failed");
  }
  return kOk;
}

int cmd_sweep(const mlds::Settings& s) {
  const mlds::SweepJob job = mlds::sweep_config(s);
  const auto records = mlds::run_sweep(job.sweep);
  const auto summaries = mlds::summarize(records);
  mlds::write_file_atomic(job.out + ".csv",
                          [&](std::ostream& os) { mlds::write_sweep_csv(os, records); });
  mlds::write_file_atomic(job.out + ".series.txt",
                          [&](std::ostream& os) { mlds::write_series(os, summaries); });
  mlds::write_file_atomic(job.out + ".levels.txt", [&](std::ostream& os) {
    for (std::size_t i = 0; i < job.sweep.methods.size(); ++i) {
      if (i) os << '\n';
      mlds::write_level_grid(os, summaries, job.sweep.methods[i]);
    }
  });
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.ok() ? 0 : 1;
  std::cout << "wrote " << records.size() << " records to " << job.out << ".csv (" << failed
            << " failed)\n";
  for (const auto& sm : summaries)
    std::cout << "N=" << sm.n << " T=" << sm.t << " " << mlds::to_string(sm.method)
              << " median=" << mlds::format_double(sm.median, 6) << " ok=" << sm.n_ok
              << " failed=" << sm.n_failed << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment-based estimation of mixtures of linear dynamical systems"};
  app.require_subcommand(1);

  CLI::App* simulate = app.add_subcommand("simulate", "draw a random mixture and a dataset");
  FlagSet sim_flags(simulate);
  add_mixture_flags(sim_flags);
  add_noise_flags(sim_flags);
  sim_flags.option("N", "number of trajectories");
  sim_flags.option("T", "trajectory length");
  sim_flags.option("seed", "random seed");
  sim_flags.option("out", "output prefix: writes <out>.mixture and <out>.dataset");
  sim_flags.option("config", "key=value settings file");

  CLI::App* fit = app.add_subcommand("fit", "estimate mixture Markov parameters from a dataset");
  FlagSet fit_flags(fit);
  fit_flags.positional("dataset", "dataset file");
  fit_flags.option("L", "number of Markov parameters");
  fit_flags.option("K", "number of mixture components");
  fit_flags.option("sigma-u", "input standard deviation used to scale covariates");
  fit_flags.option("restarts", "power-method restarts per round (0 = 20K)");
  fit_flags.option("iters", "power-method iterations");
  fit_flags.option("seed", "random seed");
  fit_flags.flag("refine", "refine weights with the first moment");
  fit_flags.option("ho-kalman", "append state-space realizations of this order");
  fit_flags.option("out", "estimate file to write");
  fit_flags.option("config", "key=value settings file");

  CLI::App* eval = app.add_subcommand("eval", "compare an estimate with the true mixture");
  FlagSet eval_flags(eval);
  eval_flags.positional("estimate", "estimate file");
  eval_flags.positional("mixture", "mixture file");
  eval_flags.option("L", "horizon (must match the estimate)");
  eval_flags.option("csv", "append a result row to this CSV file");
  eval_flags.option("config", "key=value settings file");

  CLI::App* sweep = app.add_subcommand("sweep", "run an (N, T) experiment grid");
  FlagSet sweep_flags(sweep);
  add_mixture_flags(sweep_flags);
  add_noise_flags(sweep_flags);
  sweep_flags.option("N", "comma-separated trajectory counts");
  sweep_flags.option("T", "comma-separated trajectory lengths");
  sweep_flags.option("seed", "first seed");
  sweep_flags.option("trials", "number of seeds per cell");
  sweep_flags.option("methods", "comma-separated: tensor, tensor+refine, baseline");
  sweep_flags.option("restarts", "power-method restarts per round (0 = 20K)");
  sweep_flags.option("iters", "power-method iterations");
  sweep_flags.option("timing", "record wall time (1) or write 0 (0)");
  sweep_flags.option("threads", "worker threads (0 = all cores)");
  sweep_flags.option("out", "output prefix");
  sweep_flags.option("config", "key=value settings file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags.settings());
    if (fit->parsed()) return cmd_fit(fit_flags.settings());
    if (eval->parsed()) return cmd_eval(eval_flags.settings());
    if (sweep->parsed()) return cmd_sweep(sweep_flags.settings());
  } catch (const mlds::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const mlds::DegenerateMixtureError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const mlds::DecompositionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDecomposition;
  } catch (const mlds::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}

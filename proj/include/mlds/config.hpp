#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mlds/eval.hpp"
#include "mlds/lds.hpp"
#include "mlds/tensor.hpp"

namespace mlds {

/// Flat key=value settings. Keys match the CLI flag names without dashes
/// (`K`, `radius-min`, `sigma-u`, ...). Later assignments override earlier ones.
using Settings = std::map<std::string, std::string>;

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Throws ValidationError on malformed lines.
Settings parse_settings(std::istream& is);

struct SimulateConfig {
  MixtureSpec mixture;
  std::size_t n = 1000;
  std::size_t t = 96;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  std::string out = "mlds";  // writes <out>.mixture and <out>.dataset
};

struct FitConfig {
  std::string dataset;
  std::size_t horizon = 7;
  std::size_t k = 3;
  double sigma_u = 1.0;
  TpmParams tpm;
  std::uint64_t seed = 0;
  bool refine = false;
  std::size_t ho_kalman = 0;  // realization order, 0 = off
  std::string out = "mlds.estimate";
};

struct EvalConfig {
  std::string estimate;
  std::string mixture;
  std::size_t horizon = 0;  // 0 = take L from the estimate file
  std::string csv;  // optional: append a result row here
};

struct SweepJob {
  SweepConfig sweep;
  std::string out = "sweep";  // writes <out>.csv, <out>.series.txt, <out>.levels.txt
};

// Each builder rejects unknown keys and out-of-range values with ValidationError
// before anything is computed.
SimulateConfig simulate_config(const Settings& s);
FitConfig fit_config(const Settings& s);
EvalConfig eval_config(const Settings& s);
SweepJob sweep_config(const Settings& s);

}  // namespace mlds

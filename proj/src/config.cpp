#include "mlds/config.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <set>
#include <sstream>

#include "mlds/errors.hpp"

namespace mlds {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  Reader(const Settings& s, std::set<std::string> allowed) : s_(s) {
    for (const auto& [key, value] : s_)
      if (!allowed.count(key)) throw ValidationError("unknown setting '" + key + "'");
  }

  bool has(const std::string& key) const { return s_.count(key) > 0; }

  std::string str(const std::string& key, std::string fallback) const {
    const auto it = s_.find(key);
    return it == s_.end() ? fallback : it->second;
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = s_.find(key);
    return it == s_.end() ? fallback : parse_u64(key, it->second);
  }

  std::size_t size(const std::string& key, std::size_t fallback, std::size_t min_value) const {
    const std::size_t v = static_cast<std::size_t>(u64(key, fallback));
    if (v < min_value)
      throw ValidationError(key + " must be >= " + std::to_string(min_value) + ", got " +
                            std::to_string(v));
    return v;
  }

  double real(const std::string& key, double fallback) const {
    const auto it = s_.find(key);
    if (it == s_.end()) return fallback;
    double v = 0.0;
    const char* b = it->second.data();
    const char* e = b + it->second.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
      throw ValidationError(key + ": expected a number, got '" + it->second + "'");
    return v;
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto it = s_.find(key);
    if (it == s_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on" || v.empty()) return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ValidationError(key + ": expected a boolean, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream ss(str(key, ""));
    for (std::string item; std::getline(ss, item, ',');)
      if (!trim(item).empty()) out.push_back(trim(item));
    return out;
  }

  std::vector<std::size_t> sizes(const std::string& key, std::vector<std::size_t> fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : list(key)) out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
    if (out.empty()) throw ValidationError(key + ": empty list");
    return out;
  }

 private:
  static std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
      throw ValidationError(key + ": expected a non-negative integer, got '" + text + "'");
    return v;
  }

  const Settings& s_;
};

MixtureSpec read_mixture_spec(const Reader& r) {
  MixtureSpec m;
  m.k = r.size("K", m.k, 1);
  m.n = r.size("n", m.n, 1);
  m.m = r.size("m", m.m, 1);
  m.horizon = r.size("L", m.horizon, 1);
  m.radius_min = r.real("radius-min", m.radius_min);
  m.radius_max = r.real("radius-max", m.radius_max);
  m.validate();
  return m;
}

NoiseConfig read_noise(const Reader& r) {
  NoiseConfig n;
  n.sigma_u = r.real("sigma-u", n.sigma_u);
  n.sigma_w1 = r.real("sigma-w1", n.sigma_w1);
  n.sigma_w2 = r.real("sigma-w2", n.sigma_w2);
  n.validate();
  return n;
}

TpmParams read_tpm(const Reader& r) {
  TpmParams p;
  p.n_restarts = r.size("restarts", p.n_restarts, 0);
  p.n_iters = r.size("iters", p.n_iters, 1);
  return p;
}

const std::set<std::string> kMixtureKeys = {"K", "n", "m", "L", "radius-min", "radius-max"};
const std::set<std::string> kNoiseKeys = {"sigma-u", "sigma-w1", "sigma-w2"};

std::set<std::string> keys(std::initializer_list<std::set<std::string>> groups,
                           std::initializer_list<std::string> extra) {
  std::set<std::string> out(extra);
  for (const auto& g : groups) out.insert(g.begin(), g.end());
  out.insert("config");
  return out;
}

}  // namespace

Settings parse_settings(std::istream& is) {
  Settings s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    s[key] = trim(line.substr(eq + 1));
  }
  return s;
}

SimulateConfig simulate_config(const Settings& s) {
  const Reader r(s, keys({kMixtureKeys, kNoiseKeys}, {"N", "T", "seed", "out"}));
  SimulateConfig c;
  c.mixture = read_mixture_spec(r);
  c.noise = read_noise(r);
  c.n = r.size("N", c.n, 1);
  c.t = r.size("T", c.t, 1);
  c.seed = r.u64("seed", c.seed);
  c.out = r.str("out", c.out);
  return c;
}

FitConfig fit_config(const Settings& s) {
  const Reader r(s, keys({}, {"dataset", "L", "K", "sigma-u", "restarts", "iters", "seed",
                              "refine", "ho-kalman", "out"}));
  FitConfig c;
  c.dataset = r.str("dataset", "");
  if (c.dataset.empty()) throw ValidationError("fit: a dataset file is required");
  c.horizon = r.size("L", c.horizon, 1);
  c.k = r.size("K", c.k, 1);
  c.sigma_u = r.real("sigma-u", c.sigma_u);
  if (!(c.sigma_u > 0.0)) throw ValidationError("sigma-u must be > 0");
  c.tpm = read_tpm(r);
  c.seed = r.u64("seed", c.seed);
  c.refine = r.flag("refine", c.refine);
  c.ho_kalman = r.size("ho-kalman", c.ho_kalman, 0);
  if (c.ho_kalman > 0 && c.horizon < 2 * c.ho_kalman + 1)
    throw ValidationError("ho-kalman: L must be >= 2n+1");
  c.out = r.str("out", c.out);
  return c;
}

EvalConfig eval_config(const Settings& s) {
  const Reader r(s, keys({}, {"estimate", "mixture", "L", "csv"}));
  EvalConfig c;
  c.estimate = r.str("estimate", "");
  c.mixture = r.str("mixture", "");
  if (c.estimate.empty() || c.mixture.empty())
    throw ValidationError("eval: estimate and mixture files are required");
  c.horizon = r.size("L", c.horizon, 0);
  c.csv = r.str("csv", "");
  return c;
}

SweepJob sweep_config(const Settings& s) {
  const Reader r(s, keys({kMixtureKeys, kNoiseKeys}, {"N", "T", "seed", "trials", "methods",
                                                      "restarts", "iters", "timing", "threads",
                                                      "out"}));
  SweepJob job;
  SweepConfig& c = job.sweep;
  c.mixture = read_mixture_spec(r);
  c.noise = read_noise(r);
  c.tpm = read_tpm(r);
  c.ns = r.sizes("N", c.ns);
  c.ts = r.sizes("T", c.ts);
  if (r.has("methods")) {
    c.methods.clear();
    for (const auto& m : r.list("methods")) c.methods.push_back(parse_method(m));
  }
  const std::uint64_t base = r.u64("seed", 0);
  const std::size_t trials = r.size("trials", 1, 1);
  c.seeds.clear();
  for (std::size_t i = 0; i < trials; ++i) c.seeds.push_back(base + i);
  c.record_timing = r.flag("timing", c.record_timing);
  c.threads = r.size("threads", c.threads, 0);
  job.out = r.str("out", job.out);
  c.validate();
  return job;
}

}  // namespace mlds

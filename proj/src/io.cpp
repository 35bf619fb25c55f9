#include "mlds/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>
#include <vector>

#include "mlds/errors.hpp"

namespace mlds {

std::string format_double(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

namespace {

class LineReader {
 public:
  LineReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  std::string next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return line;
    }
    fail("unexpected end of file");
  }

  bool peek_line(std::string& line) {
    const auto pos = is_.tellg();
    const std::size_t saved = line_no_;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        is_.clear();
        is_.seekg(pos);
        line_no_ = saved;
        return true;
      }
    }
    is_.clear();
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(what_ + " line " + std::to_string(line_no_) + ": " + msg);
  }

  std::vector<double> numbers(std::size_t expected) {
    std::istringstream ss(next());
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail("bad number '" + tok + "'");
      out.push_back(v);
    }
    if (out.size() != expected)
      fail("expected " + std::to_string(expected) + " values, got " + std::to_string(out.size()));
    return out;
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto v = numbers(static_cast<std::size_t>(cols));
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(c)];
    }
    return m;
  }

 private:
  std::istream& is_;
  std::string what_;
  std::size_t line_no_ = 0;
};

// Parses "magic v1, a=1, b=2" into {a: 1, b: 2}.
std::map<std::string, long long> parse_header(LineReader& in, const std::string& magic) {
  const std::string line = in.next();
  const std::string prefix = magic + " v1";
  if (line.rfind(prefix, 0) != 0) in.fail("expected header '" + prefix + ", ...'");
  std::map<std::string, long long> fields;
  std::istringstream ss(line.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    if (first == std::string::npos) continue;
    item = item.substr(first);
    const auto eq = item.find('=');
    if (eq == std::string::npos) in.fail("bad header field '" + item + "'");
    char* end = nullptr;
    const std::string value = item.substr(eq + 1);
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == value.c_str() || (*end != '\0' && *end != ' ')) in.fail("bad header value '" + item + "'");
    fields[item.substr(0, eq)] = v;
  }
  return fields;
}

long long field(LineReader& in, const std::map<std::string, long long>& fields,
                const std::string& key, long long min_value) {
  const auto it = fields.find(key);
  if (it == fields.end()) in.fail("header is missing '" + key + "'");
  if (it->second < min_value) in.fail("header field '" + key + "' out of range");
  return it->second;
}

void write_row(std::ostream& os, const Eigen::MatrixXd& m, Eigen::Index r) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c) os << ' ';
    os << format_double(m(r, c));
  }
  os << '\n';
}

void write_system(std::ostream& os, const StateSpace& ss) {
  for (Eigen::Index r = 0; r < ss.a.rows(); ++r) write_row(os, ss.a, r);
  for (Eigen::Index r = 0; r < ss.b.rows(); ++r) write_row(os, ss.b, r);
  write_row(os, ss.c, 0);
}

StateSpace read_system(LineReader& in, Eigen::Index n, Eigen::Index m) {
  StateSpace ss;
  ss.a = in.matrix(n, n);
  ss.b = in.matrix(n, m);
  ss.c = in.matrix(1, n).row(0);
  return ss;
}

double read_weight(LineReader& in) {
  std::istringstream ss(in.next());
  std::string key;
  double w = 0.0;
  if (!(ss >> key >> w) || key != "weight") in.fail("expected 'weight <p>'");
  return w;
}

}  // namespace

void write_dataset(std::ostream& os, const TrajectoryDataset& data) {
  data.validate();
  const bool labeled = data.labeled();
  os << "mlds-dataset v1, N=" << data.size() << ", T=" << data.horizon_t
     << ", m=" << data.input_dim << ", labeled=" << (labeled ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Trajectory& tr = data.trajectories[i];
    os << "traj " << i << " label ";
    if (labeled)
      os << *tr.label;
    else
      os << '-';
    os << '\n';
    for (Eigen::Index t = 0; t < tr.inputs.rows(); ++t) {
      for (Eigen::Index j = 0; j < tr.inputs.cols(); ++j) os << format_double(tr.inputs(t, j)) << ' ';
      os << format_double(tr.outputs(t)) << '\n';
    }
  }
}

TrajectoryDataset read_dataset(std::istream& is) {
  LineReader in(is, "dataset");
  const auto h = parse_header(in, "mlds-dataset");
  const auto n = static_cast<std::size_t>(field(in, h, "N", 1));
  TrajectoryDataset data;
  data.horizon_t = static_cast<std::size_t>(field(in, h, "T", 1));
  data.input_dim = static_cast<std::size_t>(field(in, h, "m", 1));
  const bool labeled = field(in, h, "labeled", 0) != 0;
  data.trajectories.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::istringstream ss(in.next());
    std::string traj_kw, label_kw, label;
    std::size_t idx = 0;
    if (!(ss >> traj_kw >> idx >> label_kw >> label) || traj_kw != "traj" || label_kw != "label" ||
        idx != i)
      in.fail("expected 'traj " + std::to_string(i) + " label <k|->'");
    Trajectory tr;
    if (labeled) {
      char* end = nullptr;
      const unsigned long long k = std::strtoull(label.c_str(), &end, 10);
      if (end == label.c_str() || *end != '\0') in.fail("bad label '" + label + "'");
      tr.label = static_cast<std::size_t>(k);
    } else if (label != "-") {
      in.fail("unlabeled dataset must use '-' labels");
    }
    const auto t_len = static_cast<Eigen::Index>(data.horizon_t);
    const auto m = static_cast<Eigen::Index>(data.input_dim);
    const Eigen::MatrixXd rows = in.matrix(t_len, m + 1);
    tr.inputs = rows.leftCols(m);
    tr.outputs = rows.col(m);
    data.trajectories.push_back(std::move(tr));
  }
  return data;
}

void write_mixture(std::ostream& os, const MixtureModel& model) {
  os << "mlds-mixture v1, K=" << model.size() << ", n=" << model.order()
     << ", m=" << model.input_dim() << '\n';
  for (const auto& c : model.components()) {
    os << "weight " << format_double(c.weight) << '\n';
    write_system(os, c.system);
  }
}

MixtureModel read_mixture(std::istream& is) {
  LineReader in(is, "mixture");
  const auto h = parse_header(in, "mlds-mixture");
  const auto k = static_cast<std::size_t>(field(in, h, "K", 1));
  const auto n = static_cast<Eigen::Index>(field(in, h, "n", 1));
  const auto m = static_cast<Eigen::Index>(field(in, h, "m", 1));
  std::vector<MixtureComponent> comps;
  for (std::size_t c = 0; c < k; ++c) {
    MixtureComponent comp;
    comp.weight = read_weight(in);
    comp.system = read_system(in, n, m);
    comps.push_back(std::move(comp));
  }
  try {
    return MixtureModel(std::move(comps));
  } catch (const ValidationError& e) {
    throw IoError(std::string("mixture: ") + e.what());
  }
}

void write_estimate(std::ostream& os, const MarkovEstimate& est) {
  if (est.components.empty()) throw ValidationError("write_estimate: empty estimate");
  const std::size_t horizon = est.components.front().horizon;
  const std::size_t m = est.components.front().input_dim;
  os << "mlds-estimate v1, K=" << est.size() << ", L=" << horizon << ", m=" << m << '\n';
  for (std::size_t k = 0; k < est.size(); ++k) {
    os << "weight " << format_double(est.weights(static_cast<Eigen::Index>(k))) << '\n';
    for (std::size_t t = 1; t <= horizon; ++t) {
      const Eigen::VectorXd g = est.components[k].block(t);
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (j) os << ' ';
        os << format_double(g(j));
      }
      os << '\n';
    }
  }
  for (std::size_t k = 0; k < est.realizations.size(); ++k) {
    os << "realization " << k << " n=" << est.realizations[k].order() << '\n';
    write_system(os, est.realizations[k]);
  }
}

MarkovEstimate read_estimate(std::istream& is) {
  LineReader in(is, "estimate");
  const auto h = parse_header(in, "mlds-estimate");
  const auto k = static_cast<std::size_t>(field(in, h, "K", 1));
  const auto horizon = static_cast<std::size_t>(field(in, h, "L", 1));
  const auto m = static_cast<std::size_t>(field(in, h, "m", 1));
  MarkovEstimate est;
  est.weights.resize(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    est.weights(static_cast<Eigen::Index>(c)) = read_weight(in);
    const Eigen::MatrixXd blocks =
        in.matrix(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(m));
    Eigen::VectorXd values(static_cast<Eigen::Index>(horizon * m));
    for (Eigen::Index t = 0; t < blocks.rows(); ++t)
      values.segment(t * blocks.cols(), blocks.cols()) = blocks.row(t).transpose();
    est.components.emplace_back(horizon, m, std::move(values));
  }
  std::string line;
  while (in.peek_line(line)) {
    std::istringstream ss(in.next());
    std::string kw, order_field;
    std::size_t idx = 0;
    if (!(ss >> kw >> idx >> order_field) || kw != "realization" || idx != est.realizations.size() ||
        order_field.rfind("n=", 0) != 0)
      in.fail("expected 'realization <k> n=<n>'");
    const long long n = std::atoll(order_field.c_str() + 2);
    if (n < 1) in.fail("bad realization order");
    est.realizations.push_back(read_system(in, n, static_cast<Eigen::Index>(m)));
  }
  return est;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& emit) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    emit(out);
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace mlds

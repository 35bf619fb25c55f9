#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "mlds/lds.hpp"
#include "mlds/pipeline.hpp"

namespace mlds {

/// printf "%.<digits>g"; 17 significant digits round-trip any double.
std::string format_double(double x, int digits = 17);

// Dataset file:
//   mlds-dataset v1, N=<N>, T=<T>, m=<m>, labeled=<0|1>
//   traj <i> label <k|->
//   <u_0 ... u_{m-1} y>        (T lines; line t holds u_{t-1} and y_t)
void write_dataset(std::ostream& os, const TrajectoryDataset& data);
TrajectoryDataset read_dataset(std::istream& is);

// Mixture file:
//   mlds-mixture v1, K=<K>, n=<n>, m=<m>
//   weight <p>                 then A (n rows), B (n rows), C (1 row), per component
void write_mixture(std::ostream& os, const MixtureModel& model);
MixtureModel read_mixture(std::istream& is);

// Estimate file:
//   mlds-estimate v1, K=<K>, L=<L>, m=<m>
//   weight <p>                 then L lines of m floats, per component
// Optional trailing realizations, one block per component:
//   realization <k> n=<n>      then A (n rows), B (n rows), C (1 row)
void write_estimate(std::ostream& os, const MarkovEstimate& est);
MarkovEstimate read_estimate(std::istream& is);

/// Writes through `emit` into a temporary sibling file, then renames it over
/// `path`. Throws IoError on failure.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& emit);

/// Opens `path` for reading and hands the stream to `parse`. Throws IoError.
template <typename Parse>
auto read_file(const std::filesystem::path& path, Parse&& parse);

}  // namespace mlds

#include <fstream>

#include "mlds/errors.hpp"

template <typename Parse>
auto mlds::read_file(const std::filesystem::path& path, Parse&& parse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse(in);
}

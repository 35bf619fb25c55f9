#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlds {

/// Base class for all library errors. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or mismatched dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Trajectories shorter than the requested horizon.
class InsufficientLengthError : public ValidationError {
 public:
  InsufficientLengthError(std::size_t have, std::size_t need)
      : ValidationError("insufficient trajectory length: T=" + std::to_string(have) +
                        " but L=" + std::to_string(need) + " is required"),
        have_(have),
        need_(need) {}

  std::size_t have() const { return have_; }
  std::size_t need() const { return need_; }

 private:
  std::size_t have_;
  std::size_t need_;
};

/// The K-th singular value of the second moment is too small to whiten.
class DegenerateMixtureError : public Error {
 public:
  explicit DegenerateMixtureError(double sigma_k, const std::string& where = {})
      : Error("degenerate mixture: sigma_K(M2) = " + std::to_string(sigma_k) +
              (where.empty() ? std::string() : " (" + where + ")")),
        sigma_k_(sigma_k) {}

  double sigma_k() const { return sigma_k_; }

 private:
  double sigma_k_;
};

/// Every restart of the tensor power method produced a zero update.
class DecompositionError : public Error {
 public:
  explicit DecompositionError(std::size_t round)
      : Error("tensor decomposition failed in round " + std::to_string(round) +
              ": all restarts produced zero updates"),
        round_(round) {}

  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlds

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sqnkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = std::size_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double best_grad_norm)
      : Error(what), best_grad_norm_(best_grad_norm) {}

  double best_grad_norm() const noexcept { return best_grad_norm_; }

private:
  double best_grad_norm_;
};

class DivergenceError : public Error {
public:
  using Error::Error;
};

// Counts data points touched, the unit used for every progress axis.
struct DataPassMeter {
  std::uint64_t grad_evals = 0;
  std::uint64_t hvp_evals = 0;

  void add_grads(std::uint64_t k) noexcept { grad_evals += k; }
  void add_hvps(std::uint64_t k) noexcept { hvp_evals += k; }

  double grad_passes(std::size_t n) const noexcept { return double(grad_evals) / double(n); }
  double hvp_passes(std::size_t n) const noexcept { return double(hvp_evals) / double(n); }
  double passes(std::size_t n) const noexcept {
    return double(grad_evals + hvp_evals) / double(n);
  }
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace sqnkit

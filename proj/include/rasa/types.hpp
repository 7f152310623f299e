#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rasa {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
/// Row-major stacking of per-agent vectors: row i is agent i.
using AgentMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error taxonomy. The CLI maps InvalidArgument/ConfigError to exit 2 and
// every numerical failure to exit 1.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A standing assumption of the model fails for the given input.
class AssumptionViolated : public InvalidArgument {
 public:
  AssumptionViolated(int assumption, const std::string& what)
      : InvalidArgument(what + " (Assumption " + std::to_string(assumption) + ")"), assumption_(assumption) {}
  int assumption() const noexcept { return assumption_; }

 private:
  int assumption_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ConvergenceFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class GenerationFailure : public Error {
 public:
  using Error::Error;
};

class Diverged : public Error {
 public:
  Diverged(long iteration, double norm)
      : Error("state norm " + std::to_string(norm) + " exceeded divergence guard at iteration " +
              std::to_string(iteration)),
        iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

class Inconsistency : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace rasa

#pragma once

#include <stdexcept>
#include <string>

namespace rbto {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for degenerate elements and failed or inaccurate linear solves.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = -1.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class SingularElement : public SolverError {
 public:
  explicit SingularElement(int element)
      : SolverError("degenerate element " + std::to_string(element)), element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbto

#pragma once

#include <stdexcept>
#include <string>

namespace skf {

// Status codes shared by the C API and the CLI exit codes.
enum class Status : int {
  ok = 0,
  validation_error = 2,
  numerical_error = 3,
  planning_error = 4,
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& what) : std::runtime_error(what), status_(status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Status::validation_error, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Status::numerical_error, what) {}
};

class PlanningError : public Error {
 public:
  explicit PlanningError(const std::string& what) : Error(Status::planning_error, what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace skf

#pragma once

#include <stdexcept>
#include <string>

namespace dpmhp {

/// Failure category. Maps one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

// Bad shapes, missing files, invalid parameters.
class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// NaN/Inf during training or evaluation, singular matrices.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

} // namespace dpmhp

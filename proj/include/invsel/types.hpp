#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace invsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorKind {
  SingularOperator,
  DimensionMismatch,
  UnsupportedSize,
  RankDeficientModel,
  SpaceTooLarge,
  IndexOutOfRange,
  AtomNotFound,
  ZeroTruth,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the ErrorKind tags so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of the numerical kind (singular factorizations and
  /// the like) as opposed to bad input.
  bool numerical() const noexcept {
    return kind_ == ErrorKind::SingularOperator || kind_ == ErrorKind::RankDeficientModel;
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularOperator: return "SingularOperator";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnsupportedSize: return "UnsupportedSize";
    case ErrorKind::RankDeficientModel: return "RankDeficientModel";
    case ErrorKind::SpaceTooLarge: return "SpaceTooLarge";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::AtomNotFound: return "AtomNotFound";
    case ErrorKind::ZeroTruth: return "ZeroTruth";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace invsel

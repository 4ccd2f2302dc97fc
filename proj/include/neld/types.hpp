#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace neld {

template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

// One column per particle.
template <typename Scalar> using Particles = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Vec3i = Eigen::Matrix<long long, 3, 1>;
using Mat3i = Eigen::Matrix<long long, 3, 3>;

enum class ErrorCode {
  ZeroRate,
  NotAtBoundary,
  SingularCell,
  IncompatibleCell,
  NonFinite,
  WrongFrame,
  CutoffViolation,
  InsufficientData,
  NoDecayWindow,
  Config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroRate: return "ZeroRate";
    case ErrorCode::NotAtBoundary: return "NotAtBoundary";
    case ErrorCode::SingularCell: return "SingularCell";
    case ErrorCode::IncompatibleCell: return "IncompatibleCell";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::WrongFrame: return "WrongFrame";
    case ErrorCode::CutoffViolation: return "CutoffViolation";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoDecayWindow: return "NoDecayWindow";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace neld

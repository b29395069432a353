#ifndef AIRFI_COMMON_HPP
#define AIRFI_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace airfi {

// Dense types, templated on scalar. float is the production scalar; double is
// used by the finite-difference test suites.
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowMatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatXf = MatX<float>;
using MatXd = MatX<double>;
using VecXf = VecX<float>;
using VecXd = VecX<double>;
using VecXi = Eigen::VectorXi;

// Canonical CSI sample geometry: 114 subcarriers x 3 antennas x 500 packets.
inline constexpr int kSubcarriers = 114;
inline constexpr int kAntennas = 3;
inline constexpr int kPackets = 500;
inline constexpr int kRawPackets = 2000;
inline constexpr int kChannels = kSubcarriers * kAntennas;

// Amplitude tensor stored as [kChannels x time], row (s * kAntennas + a).
// Row-major so the memory layout matches the on-disk [S, A, T] order.
using AmpMatrix = RowMatX<float>;

enum class ErrorCode {
  kMissingFile,
  kMalformedManifest,
  kShapeMismatch,
  kNonFiniteValue,
  kIoFailure,
  kInvalidArgument,
  kInvalidConfig,
  kVersionMismatch,
  kCorruptCheckpoint,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kMalformedManifest: return "malformed_manifest";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNonFiniteValue: return "non_finite_value";
    case ErrorCode::kIoFailure: return "io_failure";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kCorruptCheckpoint: return "corrupt_checkpoint";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// 64-bit FNV-1a, used for dataset/sample checksums and checkpoint integrity.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace airfi

#endif  // AIRFI_COMMON_HPP

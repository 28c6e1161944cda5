#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace avsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

enum class ErrorCode {
  InvalidParameter,
  DegenerateGaussian,
  InvalidSkeleton,
  InvalidDirection,
  Configuration,
  DimensionMismatch,
  Io,
  Schema,
  Corrupt,
  UnsupportedVersion,
  Internal,
  Numeric,
};

const char *to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

// Views into flat parameter arrays. Point i of a stride-N array lives at [N*i, N*i+N).
inline Eigen::Map<Vec3> vec3_at(std::span<double> a, std::size_t i) { return Eigen::Map<Vec3>(a.data() + 3 * i); }
inline Eigen::Map<const Vec3> vec3_at(std::span<const double> a, std::size_t i) {
  return Eigen::Map<const Vec3>(a.data() + 3 * i);
}
inline Eigen::Map<Vec4> vec4_at(std::span<double> a, std::size_t i) { return Eigen::Map<Vec4>(a.data() + 4 * i); }
inline Eigen::Map<const Vec4> vec4_at(std::span<const double> a, std::size_t i) {
  return Eigen::Map<const Vec4>(a.data() + 4 * i);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace avsplat

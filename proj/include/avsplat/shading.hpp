#pragma once

#include "avsplat/gaussian.hpp"

namespace avsplat {

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                    -1.0925484305920792, 0.5462742152960396};

/// Real SH basis up to degree 2 at a unit direction, in the usual splatting order.
Eigen::Matrix<double, kShCoeffs, 1> sh_basis(const Vec3 &d);
/// d(basis_k)/d(d), one row per basis function.
Eigen::Matrix<double, kShCoeffs, 3> sh_basis_jacobian(const Vec3 &d);

/// Decoded color before the zero clamp: 0.5 + sum_k c_k Y_k(d).
Vec3 eval_sh_unclamped(const ShCoefficients &coeffs, const Vec3 &d);
/// max(0, 0.5 + sum_k c_k Y_k(d)) per channel. Throws InvalidDirection on a zero direction.
Vec3 eval_sh(const ShCoefficients &coeffs, const Vec3 &d);

inline Vec3 apply_ao(double ao, const Vec3 &rgb) { return ao * rgb; }

struct ShadeGradients {
  ShCoefficients d_coeffs = ShCoefficients::Zero();
  Vec3 d_direction = Vec3::Zero();
  double d_ao = 0.0;
};

/// Backward of apply_ao(ao, eval_sh(coeffs, d)) given dL/dcolor.
ShadeGradients shade_backward(const ShCoefficients &coeffs, const Vec3 &d, double ao, const Vec3 &d_color);

} // namespace avsplat

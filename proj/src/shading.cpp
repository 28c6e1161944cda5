#include "avsplat/shading.hpp"

namespace avsplat {

Eigen::Matrix<double, kShCoeffs, 1> sh_basis(const Vec3 &d) {
  const double x = d.x(), y = d.y(), z = d.z();
  Eigen::Matrix<double, kShCoeffs, 1> b;
  b << kShC0, -kShC1 * y, kShC1 * z, -kShC1 * x, kShC2[0] * x * y, kShC2[1] * y * z,
      kShC2[2] * (2 * z * z - x * x - y * y), kShC2[3] * x * z, kShC2[4] * (x * x - y * y);
  return b;
}

Eigen::Matrix<double, kShCoeffs, 3> sh_basis_jacobian(const Vec3 &d) {
  const double x = d.x(), y = d.y(), z = d.z();
  Eigen::Matrix<double, kShCoeffs, 3> j;
  j << 0, 0, 0,                                                     //
      0, -kShC1, 0,                                                 //
      0, 0, kShC1,                                                  //
      -kShC1, 0, 0,                                                 //
      kShC2[0] * y, kShC2[0] * x, 0,                                //
      0, kShC2[1] * z, kShC2[1] * y,                                //
      -2 * kShC2[2] * x, -2 * kShC2[2] * y, 4 * kShC2[2] * z,       //
      kShC2[3] * z, 0, kShC2[3] * x,                                //
      2 * kShC2[4] * x, -2 * kShC2[4] * y, 0;
  return j;
}

Vec3 eval_sh_unclamped(const ShCoefficients &coeffs, const Vec3 &d) {
  return (coeffs.transpose() * sh_basis(d)).array() + 0.5;
}

Vec3 eval_sh(const ShCoefficients &coeffs, const Vec3 &d) {
  if (!(d.squaredNorm() > 0.0))
    throw Error(ErrorCode::InvalidDirection, "eval_sh: zero-length direction");
  return eval_sh_unclamped(coeffs, d).cwiseMax(0.0);
}

ShadeGradients shade_backward(const ShCoefficients &coeffs, const Vec3 &d, double ao, const Vec3 &d_color) {
  ShadeGradients g;
  const Vec3 raw = eval_sh_unclamped(coeffs, d);
  const Vec3 rgb = raw.cwiseMax(0.0);
  g.d_ao = d_color.dot(rgb);
  Vec3 d_raw = ao * d_color;
  for (int c = 0; c < 3; ++c)
    if (raw[c] < 0.0)
      d_raw[c] = 0.0;
  const auto basis = sh_basis(d);
  g.d_coeffs = basis * d_raw.transpose();
  // dL/dd = J^T (coeffs * d_raw)
  g.d_direction = sh_basis_jacobian(d).transpose() * (coeffs * d_raw);
  return g;
}

} // namespace avsplat

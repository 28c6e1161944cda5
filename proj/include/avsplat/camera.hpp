#pragma once

#include "avsplat/common.hpp"

namespace avsplat {

/// Pinhole camera. rotation/translation map world to camera space
/// (x right, y down, z forward); pixel (i, j) samples image position (i, j).
struct Camera {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double fx = 100, fy = 100, cx = 0, cy = 0;
  int width = 1, height = 1;
  double z_near = 0.01;

  Vec3 to_camera(const Vec3 &x) const { return rotation * x + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }
  void validate() const;

  static Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy, int width,
                        int height, double z_near = 0.01);
};

} // namespace avsplat

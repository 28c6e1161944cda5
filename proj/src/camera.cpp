#include "avsplat/camera.hpp"

namespace avsplat {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw Error(ErrorCode::InvalidParameter, "camera focal lengths must be positive");
  if (!(z_near > 0.0))
    throw Error(ErrorCode::InvalidParameter, "camera z_near must be positive");
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::InvalidParameter, "camera image size must be positive");
  if (!rotation.allFinite() || !translation.allFinite())
    throw Error(ErrorCode::InvalidParameter, "camera extrinsics must be finite");
}

Camera Camera::look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy, int width,
                       int height, double z_near) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = (-up).cross(z).normalized();
  const Vec3 y = z.cross(x);
  Camera c;
  c.rotation.row(0) = x;
  c.rotation.row(1) = y;
  c.rotation.row(2) = z;
  c.translation = -c.rotation * eye;
  c.fx = fx;
  c.fy = fy;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  c.z_near = z_near;
  return c;
}

} // namespace avsplat

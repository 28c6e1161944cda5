#include "avsplat/ply.hpp"

#include "avsplat/image_io.hpp"
#include "avsplat/shading.hpp"

#include <cstdio>
#include <fstream>

namespace avsplat {

void export_ply(const SkinnedGaussianModel &m, const std::optional<Pose> &pose, const std::filesystem::path &path) {
  m.validate();
  std::optional<BoneTransforms> bones;
  if (pose)
    bones = compute_bone_transforms(m.skeleton, *pose);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  const std::size_t n = m.size();
  out << "ply\nformat ascii 1.0\ncomment avsplat " << (pose ? "posed" : "canonical") << "\nelement vertex " << n
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         "property float opacity\nend_header\n";
  char line[160];
  for (std::size_t i = 0; i < n; ++i) {
    const SkinnedGaussian p = m.point(i, pose ? pose->time : 0.0);
    Vec3 x = p.geometry.center + p.displacement;
    if (bones)
      x = deform_point(x, p.skin, *bones);
    // The DC term alone is the view-independent part of the color.
    const Vec3 dc = (0.5 + kShC0 * p.sh.row(0).transpose().array()).max(0.0);
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g %u %u %u %.9g\n", x.x(), x.y(), x.z(), encode_srgb8(dc.x()),
                  encode_srgb8(dc.y()), encode_srgb8(dc.z()), p.geometry.opacity());
    out << line;
  }
  if (!out)
    throw Error(ErrorCode::Io, path.string() + ": write failed");
}

} // namespace avsplat

#include "avsplat/template_model.hpp"

namespace avsplat {

void TemplateModel::validate_and_normalize(double tol) {
  skeleton.validate();
  const std::size_t n = vertex_count();
  if (n == 0)
    throw Error(ErrorCode::InvalidParameter, "template has no vertices");
  if (vertices.size() != 3 * n)
    throw Error(ErrorCode::Schema, "template vertex array holds " + std::to_string(vertices.size()) +
                                       " values for " + std::to_string(n) + " weight rows");
  if (!uv.empty() && uv.size() != 2 * n)
    throw Error(ErrorCode::Schema, "template uv array length does not match vertex count");
  for (double v : vertices)
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidParameter, "template has a non-finite vertex coordinate");
  for (std::size_t i = 0; i < n; ++i) {
    SkinWeights &w = weights[i];
    const double s = w.sum();
    if (!(std::abs(s - 1.0) <= tol))
      throw Error(ErrorCode::InvalidParameter,
                  "weights of vertex " + std::to_string(i) + " sum to " + std::to_string(s) + " (tolerance 1e-4)");
    w.normalize();
    w.validate(skeleton.bone_count(), 1e-9);
  }
}

} // namespace avsplat

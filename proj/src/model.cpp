#include "avsplat/model.hpp"

namespace avsplat {

const char *to_string(ShMode mode) { return mode == ShMode::Uv ? "uv" : "hash"; }

ShMode parse_sh_mode(const std::string &s) {
  if (s == "hash")
    return ShMode::Hash;
  if (s == "uv")
    return ShMode::Uv;
  throw Error(ErrorCode::Configuration, "sh mode must be 'hash' or 'uv', got '" + s + "'");
}

const char *to_string(ParamGroup g) {
  switch (g) {
  case ParamGroup::Centers:
    return "centers";
  case ParamGroup::Rotations:
    return "rotations";
  case ParamGroup::Scales:
    return "scales";
  case ParamGroup::Opacity:
    return "opacity";
  case ParamGroup::Joints:
    return "joints";
  case ParamGroup::HashTable:
    return "hash";
  case ParamGroup::Mlp:
    return "mlp";
  case ParamGroup::Atlas:
    return "atlas";
  }
  return "?";
}

GaussianGeometry SkinnedGaussianModel::geometry(std::size_t i) const {
  GaussianGeometry g;
  g.center = vec3_at(std::span<const double>(centers), i);
  g.rotation = vec4_at(std::span<const double>(rotations), i);
  g.log_scale = vec3_at(std::span<const double>(log_scales), i);
  g.opacity_logit = opacity_logits[i];
  return g;
}

SkinnedGaussian SkinnedGaussianModel::point(std::size_t i, double t) const {
  SkinnedGaussian p;
  p.geometry = geometry(i);
  p.skin = skin[i];
  p.displacement = fields.sample_shape_appearance(p.geometry.center).second;
  const Vec3 shifted = p.geometry.center + p.displacement;
  if (sh_mode == ShMode::Uv) {
    if (!has_uv())
      throw Error(ErrorCode::Configuration, "sh_mode uv requires per-point UV coordinates; use sh_mode hash");
    p.sh = fields.uv_sample_sh(Vec2(uv[2 * i], uv[2 * i + 1]));
  } else {
    p.sh = fields.sample_shape_appearance(shifted).first;
  }
  p.ao = fields.sample_ao(shifted, t, ao_active);
  return p;
}

void SkinnedGaussianModel::validate() const {
  skeleton.validate();
  const std::size_t n = size();
  if (centers.size() != 3 * n || rotations.size() != 4 * n || log_scales.size() != 3 * n || skin.size() != n)
    throw Error(ErrorCode::Corrupt, "model arrays have inconsistent lengths");
  if (!uv.empty() && uv.size() != 2 * n)
    throw Error(ErrorCode::Corrupt, "uv array length does not match point count");
  if (sh_mode == ShMode::Uv && (!has_uv() || !fields.atlas))
    throw Error(ErrorCode::Configuration, "sh_mode uv requires UV coordinates and an atlas; use sh_mode hash");
  for (const SkinWeights &w : skin)
    w.validate(skeleton.bone_count(), 1e-6);
}

std::vector<ParamBlock> parameter_blocks(SkinnedGaussianModel &m) {
  std::vector<ParamBlock> b;
  const int nf_sh = m.fields.sh.grid.config().features;
  const int nf_dx = m.fields.displacement.grid.config().features;
  const int nf_ao = m.fields.ao.grid.config().features;
  b.push_back({"centers", ParamGroup::Centers, m.centers});
  b.push_back({"rotations", ParamGroup::Rotations, m.rotations});
  b.push_back({"log_scales", ParamGroup::Scales, m.log_scales});
  b.push_back({"opacity_logits", ParamGroup::Opacity, m.opacity_logits});
  b.push_back({"joints", ParamGroup::Joints, m.skeleton.joints});
  b.push_back({"sh.table", ParamGroup::HashTable, m.fields.sh.grid.params(), nf_sh});
  b.push_back({"sh.mlp", ParamGroup::Mlp, m.fields.sh.mlp.params()});
  b.push_back({"displacement.table", ParamGroup::HashTable, m.fields.displacement.grid.params(), nf_dx});
  b.push_back({"displacement.mlp", ParamGroup::Mlp, m.fields.displacement.mlp.params()});
  b.push_back({"ao.table", ParamGroup::HashTable, m.fields.ao.grid.params(), nf_ao});
  b.push_back({"ao.mlp", ParamGroup::Mlp, m.fields.ao.mlp.params()});
  if (m.fields.atlas)
    b.push_back({"atlas", ParamGroup::Atlas, m.fields.atlas->params(), kShScalars});
  return b;
}

ModelGradients::ModelGradients(const SkinnedGaussianModel &m)
    : centers(m.centers.size(), 0.0), rotations(m.rotations.size(), 0.0), log_scales(m.log_scales.size(), 0.0),
      opacity_logits(m.opacity_logits.size(), 0.0), joints(m.skeleton.joints.size(), 0.0),
      sh_mlp(m.fields.sh.mlp.param_count(), 0.0), displacement_mlp(m.fields.displacement.mlp.param_count(), 0.0),
      ao_mlp(m.fields.ao.mlp.param_count(), 0.0),
      sh_table(m.fields.sh.grid.row_count(), m.fields.sh.grid.config().features),
      displacement_table(m.fields.displacement.grid.row_count(), m.fields.displacement.grid.config().features),
      ao_table(m.fields.ao.grid.row_count(), m.fields.ao.grid.config().features),
      euler(m.skeleton.bone_count(), Vec3::Zero()) {
  if (m.fields.atlas)
    atlas = RowGradient(std::size_t(m.fields.atlas->width()) * m.fields.atlas->height(), kShScalars);
}

void ModelGradients::clear() {
  for (auto *v : {&centers, &rotations, &log_scales, &opacity_logits, &joints, &sh_mlp, &displacement_mlp, &ao_mlp})
    std::fill(v->begin(), v->end(), 0.0);
  for (auto *r : {&sh_table, &displacement_table, &ao_table, &atlas})
    r->clear();
  std::fill(euler.begin(), euler.end(), Vec3::Zero());
  translation.setZero();
}

std::vector<GradBlock> gradient_blocks(ModelGradients &g, const SkinnedGaussianModel &m) {
  std::vector<GradBlock> b;
  b.push_back({"centers", g.centers});
  b.push_back({"rotations", g.rotations});
  b.push_back({"log_scales", g.log_scales});
  b.push_back({"opacity_logits", g.opacity_logits});
  b.push_back({"joints", g.joints});
  b.push_back({"sh.table", g.sh_table.values(), &g.sh_table});
  b.push_back({"sh.mlp", g.sh_mlp});
  b.push_back({"displacement.table", g.displacement_table.values(), &g.displacement_table});
  b.push_back({"displacement.mlp", g.displacement_mlp});
  b.push_back({"ao.table", g.ao_table.values(), &g.ao_table});
  b.push_back({"ao.mlp", g.ao_mlp});
  if (m.fields.atlas)
    b.push_back({"atlas", g.atlas.values(), &g.atlas});
  return b;
}

} // namespace avsplat

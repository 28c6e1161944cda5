#include "avsplat/init.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace avsplat {

void InitConfig::validate() const {
  if (upsample_k < 0)
    throw Error(ErrorCode::Configuration, "upsample_k must be >= 0");
  if (!(radius >= 0.0) || !(initial_opacity > 0.0 && initial_opacity < 1.0) || !(bounds_margin >= 0.0))
    throw Error(ErrorCode::Configuration, "init radius/opacity/margin out of range");
  fields.validate();
}

std::vector<double> mean_neighbor_distance(const TemplateModel &tmpl, int k) {
  const std::size_t n = tmpl.vertex_count();
  std::vector<double> out(n, 0.0);
  std::vector<double> best;
  for (std::size_t i = 0; i < n; ++i) {
    best.clear();
    const Vec3 p = tmpl.vertex(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i)
        continue;
      const double d = (tmpl.vertex(j) - p).squaredNorm();
      if (static_cast<int>(best.size()) < k) {
        best.push_back(d);
        std::push_heap(best.begin(), best.end());
      } else if (d < best.front()) {
        std::pop_heap(best.begin(), best.end());
        best.back() = d;
        std::push_heap(best.begin(), best.end());
      }
    }
    double s = 0.0;
    for (double d : best)
      s += std::sqrt(d);
    out[i] = best.empty() ? 0.0 : s / double(best.size());
  }
  return out;
}

SkinnedGaussianModel init_from_skinned_model(const TemplateModel &tmpl, const InitConfig &cfg) {
  cfg.validate();
  const std::size_t nv = tmpl.vertex_count();
  if (nv == 0)
    throw Error(ErrorCode::InvalidParameter, "cannot initialize from an empty template");
  if (cfg.sh_mode == ShMode::Uv && !tmpl.has_uv())
    throw Error(ErrorCode::Configuration, "sh_mode uv requires a template with UV coordinates");

  const std::vector<double> spacing = mean_neighbor_distance(tmpl, 3);
  const int per = cfg.upsample_k + 1;
  const std::size_t n = nv * std::size_t(per);

  SkinnedGaussianModel m;
  m.skeleton = tmpl.skeleton;
  m.centers.resize(3 * n);
  m.rotations.resize(4 * n);
  m.log_scales.resize(3 * n);
  m.opacity_logits.assign(n, logit(cfg.initial_opacity));
  m.skin.resize(n);
  if (tmpl.has_uv())
    m.uv.resize(2 * n);
  m.sh_mode = cfg.sh_mode;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (std::size_t v = 0; v < nv; ++v) {
    const Vec3 base = tmpl.vertex(v);
    // A lone vertex has no neighbors; fall back to the sampling radius.
    double half = 0.5 * spacing[v];
    if (!(half > 0.0))
      half = cfg.radius > 0.0 ? cfg.radius : 0.01;
    const double log_s = std::log(half);
    for (int k = 0; k < per; ++k) {
      Vec3 p = base;
      if (k > 0) {
        Vec3 off;
        do
          off = Vec3(unit(rng), unit(rng), unit(rng));
        while (off.squaredNorm() > 1.0);
        p += cfg.radius * off;
      }
      // Source vertices first, then the K samples of each vertex in order.
      const std::size_t i = k == 0 ? v : nv + v * std::size_t(cfg.upsample_k) + std::size_t(k - 1);
      Eigen::Map<Vec3>(m.centers.data() + 3 * i) = p;
      Eigen::Map<Vec4>(m.rotations.data() + 4 * i) = Vec4(1, 0, 0, 0);
      Eigen::Map<Vec3>(m.log_scales.data() + 3 * i).setConstant(log_s);
      m.skin[i] = tmpl.weights[v];
      if (tmpl.has_uv()) {
        m.uv[2 * i] = tmpl.uv[2 * v];
        m.uv[2 * i + 1] = tmpl.uv[2 * v + 1];
      }
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }

  Aabb box;
  const double pad = cfg.bounds_margin + cfg.fields.max_displacement;
  box.min = lo.array() - pad;
  box.max = hi.array() + pad;
  FieldBankConfig fc = cfg.fields;
  if (cfg.sh_mode == ShMode::Uv && fc.atlas_width == 0)
    fc.atlas_width = fc.atlas_height = 64;
  m.fields = FieldBank(fc, box, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  m.validate();
  return m;
}

} // namespace avsplat

#include "avsplat/optimizer.hpp"

namespace avsplat {

double LearningRates::of(ParamGroup g) const {
  switch (g) {
  case ParamGroup::Centers:
    return centers;
  case ParamGroup::Rotations:
    return rotations;
  case ParamGroup::Scales:
    return scales;
  case ParamGroup::Opacity:
    return opacity;
  case ParamGroup::Joints:
    return joints;
  case ParamGroup::HashTable:
    return hash;
  case ParamGroup::Mlp:
    return mlp;
  case ParamGroup::Atlas:
    return atlas;
  }
  return 0.0;
}

void LearningRates::validate() const {
  for (double v : {centers, rotations, scales, opacity, joints, hash, mlp, atlas})
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::Configuration, "learning rates must be positive and finite");
}

Adam::Adam(SkinnedGaussianModel &model, const AdamConfig &cfg) : cfg_(cfg) {
  for (const ParamBlock &b : parameter_blocks(model))
    moments_.push_back({b.name, std::vector<double>(b.values.size(), 0.0), std::vector<double>(b.values.size(), 0.0), 0});
}

Adam::Report Adam::step(SkinnedGaussianModel &model, ModelGradients &grads, const LearningRates &lr,
                        const std::function<bool(const std::string &)> &frozen) {
  lr.validate();
  std::vector<ParamBlock> params = parameter_blocks(model);
  std::vector<GradBlock> gblocks = gradient_blocks(grads, model);
  if (params.size() != moments_.size() || gblocks.size() != params.size())
    throw Error(ErrorCode::DimensionMismatch, "optimizer state does not match the model's parameter blocks");

  Report report;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamBlock &p = params[k];
    GradBlock &g = gblocks[k];
    AdamMoments &mo = moments_[k];
    if (mo.name != p.name || mo.m.size() != p.values.size() || g.dense.size() != p.values.size())
      throw Error(ErrorCode::DimensionMismatch, "optimizer block '" + mo.name + "' does not match '" + p.name + "'");
    if (frozen && frozen(p.name))
      continue;

    // Index ranges to update: all entries, or the touched rows of a table.
    const int width = g.rows ? g.rows->row_width() : 0;
    auto for_each_index = [&](auto &&fn) {
      if (g.rows) {
        for (std::uint32_t r : g.rows->touched())
          for (int c = 0; c < width; ++c)
            fn(std::size_t(r) * width + c);
      } else {
        for (std::size_t i = 0; i < p.values.size(); ++i)
          fn(i);
      }
    };

    bool finite = true;
    for_each_index([&](std::size_t i) { finite = finite && std::isfinite(g.dense[i]); });
    if (!finite) {
      report.skipped.push_back(p.name);
      continue;
    }
    if (g.rows && g.rows->touched().empty())
      continue;

    ++mo.step;
    const double rate = lr.of(p.group);
    const double c1 = 1.0 - std::pow(b1, double(mo.step));
    const double c2 = 1.0 - std::pow(b2, double(mo.step));
    for_each_index([&](std::size_t i) {
      const double gi = g.dense[i];
      mo.m[i] = b1 * mo.m[i] + (1.0 - b1) * gi;
      mo.v[i] = b2 * mo.v[i] + (1.0 - b2) * gi * gi;
      p.values[i] -= rate * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + cfg_.epsilon);
    });

    if (p.group == ParamGroup::Rotations) {
      for (std::size_t i = 0; i + 3 < p.values.size(); i += 4) {
        Eigen::Map<Vec4> q(p.values.data() + i);
        const double n = q.norm();
        if (n > 0.0 && std::isfinite(n))
          q /= n;
        else
          q = Vec4(1, 0, 0, 0);
      }
    }
  }
  return report;
}

} // namespace avsplat

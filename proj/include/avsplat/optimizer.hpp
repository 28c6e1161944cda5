#pragma once

#include "avsplat/model.hpp"

#include <functional>

namespace avsplat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

/// Fixed per-group learning rates.
struct LearningRates {
  double centers = 2e-4;
  double rotations = 1e-3;
  double scales = 5e-3;
  double opacity = 5e-2;
  double joints = 1e-4;
  double hash = 1e-2;
  double mlp = 1e-3;
  double atlas = 1e-2;

  double of(ParamGroup g) const;
  void validate() const;
};

/// Adam moments for one parameter block. step counts the updates this block
/// has received and drives its bias correction.
struct AdamMoments {
  std::string name;
  std::vector<double> m, v;
  std::uint64_t step = 0;
};

/// Adam over the model's parameter blocks. Row-tracked tables are updated
/// lazily: only rows that received a gradient this step are touched.
class Adam {
public:
  Adam() = default;
  explicit Adam(SkinnedGaussianModel &model, const AdamConfig &cfg = {});

  struct Report {
    std::vector<std::string> skipped; // blocks with non-finite gradients
  };

  /// frozen(name) == true leaves that block and its moments untouched.
  Report step(SkinnedGaussianModel &model, ModelGradients &grads, const LearningRates &lr,
              const std::function<bool(const std::string &)> &frozen = {});

  const AdamConfig &config() const { return cfg_; }
  std::vector<AdamMoments> &moments() { return moments_; }
  const std::vector<AdamMoments> &moments() const { return moments_; }

private:
  AdamConfig cfg_;
  std::vector<AdamMoments> moments_;
};

} // namespace avsplat

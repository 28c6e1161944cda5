#pragma once

#include "avsplat/dataset.hpp"
#include "avsplat/init.hpp"
#include "avsplat/loss.hpp"
#include "avsplat/optimizer.hpp"
#include "avsplat/pipeline.hpp"

#include <functional>

namespace avsplat {

struct TrainConfig {
  int epochs = 10;
  int ao_start_epoch = 5; // 1-based epoch at which the AO field starts training
  bool use_ao = true;
  std::uint64_t seed = 0;
  int threads = 1;
  LearningRates lr{};
  AdamConfig adam{};
  LossConfig loss{};
  RasterConfig raster{};

  void validate() const;
};

/// Optimizer and schedule position. epoch counts completed epochs.
struct TrainState {
  int epoch = 0;
  std::uint64_t step = 0;
  Adam adam;
};

struct StepMetrics {
  std::uint64_t step = 0;
  int epoch = 0; // 1-based
  int camera = 0, frame = 0;
  double loss = 0.0;
  double psnr = 0.0; // capped
  double ms = 0.0;
  std::vector<std::string> skipped; // parameter blocks dropped for non-finite gradients
};

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_psnr = 0.0;
  bool ao_active = false;
  double ms = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepMetrics &)> on_step;
  std::function<void(const EpochMetrics &, const SkinnedGaussianModel &, const TrainState &)> on_epoch;
};

/// Optimizes one avatar against the training cameras of a dataset.
class Trainer {
public:
  /// Takes ownership of model. state.adam is created when it is empty.
  Trainer(const Dataset &ds, SkinnedGaussianModel model, const TrainConfig &cfg, TrainState state = {});

  /// Runs one epoch over every (train camera, frame) pair in seeded order.
  EpochMetrics run_epoch(const TrainCallbacks &cb = {});
  /// Runs the remaining epochs up to cfg.epochs.
  void run(const TrainCallbacks &cb = {});

  SkinnedGaussianModel &model() { return model_; }
  const SkinnedGaussianModel &model() const { return model_; }
  TrainState &state() { return state_; }
  const TrainConfig &config() const { return cfg_; }

  /// Order of (camera, frame) pairs for a 1-based epoch.
  std::vector<std::pair<int, int>> epoch_order(int epoch) const;
  /// Single optimization step; returns the loss.
  double step(int camera, int frame, double *psnr_out = nullptr);
  /// Blocks skipped by the most recent optimizer step.
  const std::vector<std::string> &last_skipped() const { return last_skipped_; }

private:
  bool frozen(const std::string &block) const;

  const Dataset &ds_;
  SkinnedGaussianModel model_;
  TrainConfig cfg_;
  TrainState state_;
  std::unique_ptr<ThreadPool> pool_;
  ModelGradients grads_;
  std::vector<int> train_cameras_;
  std::vector<std::string> last_skipped_;
};

/// Checks that a model and dataset agree on avatar and bone counts.
void check_compatible(const Dataset &ds, const SkinnedGaussianModel &model);

struct ViewMetrics {
  int camera = 0, frame = 0;
  double psnr = 0.0; // capped
  double ssim = 0.0;
};

/// Renders each (camera in split, frame) pair, quantizes through 8-bit sRGB,
/// and compares with the dataset images.
std::vector<ViewMetrics> evaluate(const Dataset &ds, std::span<const SkinnedGaussianModel *const> models,
                                  const std::string &split, bool use_ao = true, int threads = 1,
                                  const RasterConfig &raster = {});

/// Renders frame f of the dataset from camera c (all avatars).
Image render_dataset_view(const Dataset &ds, std::span<const SkinnedGaussianModel *const> models, int camera,
                          int frame, bool use_ao, ThreadPool *pool = nullptr, const RasterConfig &raster = {});

} // namespace avsplat

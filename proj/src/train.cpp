#include "avsplat/train.hpp"

#include "avsplat/image_io.hpp"

#include <algorithm>
#include <chrono>
#include <random>

namespace avsplat {

void TrainConfig::validate() const {
  if (epochs < 0)
    throw Error(ErrorCode::Configuration, "epochs must be >= 0");
  if (ao_start_epoch < 1)
    throw Error(ErrorCode::Configuration, "ao_start_epoch must be >= 1");
  if (threads < 1)
    throw Error(ErrorCode::Configuration, "threads must be >= 1");
  lr.validate();
  loss.validate();
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0))
    throw Error(ErrorCode::Configuration, "adam betas must be in [0, 1) and epsilon positive");
}

void check_compatible(const Dataset &ds, const SkinnedGaussianModel &model) {
  if (ds.bone_count != model.skeleton.bone_count())
    throw Error(ErrorCode::InvalidSkeleton, "dataset poses have " + std::to_string(ds.bone_count) +
                                                " bones but the model skeleton has " +
                                                std::to_string(model.skeleton.bone_count()));
}

Trainer::Trainer(const Dataset &ds, SkinnedGaussianModel model, const TrainConfig &cfg, TrainState state)
    : ds_(ds), model_(std::move(model)), cfg_(cfg), state_(std::move(state)) {
  cfg_.validate();
  model_.validate();
  check_compatible(ds_, model_);
  if (ds_.avatar_count != 1)
    throw Error(ErrorCode::Configuration, "training supports single-avatar datasets only");
  if (ds_.images.size() != ds_.frames.size())
    throw Error(ErrorCode::Configuration, "dataset was loaded without images");
  train_cameras_ = ds_.cameras_in_split("train");
  if (train_cameras_.empty())
    throw Error(ErrorCode::Configuration, "dataset has no training cameras");
  if (state_.adam.moments().empty())
    state_.adam = Adam(model_, cfg_.adam);
  if (cfg_.threads > 1)
    pool_ = std::make_unique<ThreadPool>(cfg_.threads);
  grads_ = ModelGradients(model_);
}

bool Trainer::frozen(const std::string &block) const {
  if (block.starts_with("ao."))
    return !model_.ao_active;
  if (model_.sh_mode == ShMode::Uv)
    return block.starts_with("sh.");
  return block == "atlas";
}

std::vector<std::pair<int, int>> Trainer::epoch_order(int epoch) const {
  std::vector<std::pair<int, int>> order;
  for (int f = 0; f < static_cast<int>(ds_.frames.size()); ++f)
    for (int c : train_cameras_)
      order.emplace_back(c, f);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double Trainer::step(int camera, int frame, double *psnr_out) {
  const Camera &cam = ds_.cameras[std::size_t(camera)].camera;
  AvatarInstance inst{&model_, ds_.frames[std::size_t(frame)].poses[0], true};
  RenderOptions opts{cfg_.raster, pool_.get()};
  const SceneForward fwd = render_forward({&inst, 1}, cam, ds_.background, opts);
  const ImageView img{cam.width, cam.height, fwd.buffers.color};
  const ImageView gt = ds_.images[std::size_t(frame)][std::size_t(camera)].view();

  std::vector<double> d_image;
  const double loss = total_loss(img, gt, cfg_.loss, &d_image);
  if (!std::isfinite(loss))
    throw Error(ErrorCode::Numeric, "non-finite loss at step " + std::to_string(state_.step + 1));
  if (psnr_out)
    *psnr_out = psnr_capped(img, gt);

  grads_.clear();
  ModelGradients *g = &grads_;
  render_backward(fwd, {&inst, 1}, d_image, {&g, 1}, opts);
  last_skipped_ =
      state_.adam.step(model_, grads_, cfg_.lr, [this](const std::string &b) { return frozen(b); }).skipped;
  ++state_.step;
  return loss;
}

EpochMetrics Trainer::run_epoch(const TrainCallbacks &cb) {
  using clock = std::chrono::steady_clock;
  const int epoch = state_.epoch + 1;
  model_.ao_active = cfg_.use_ao && epoch >= cfg_.ao_start_epoch;
  const auto t0 = clock::now();
  EpochMetrics em;
  em.epoch = epoch;
  em.ao_active = model_.ao_active;
  const auto order = epoch_order(epoch);
  for (const auto &[c, f] : order) {
    const auto ts = clock::now();
    StepMetrics sm;
    sm.epoch = epoch;
    sm.camera = c;
    sm.frame = f;
    sm.loss = step(c, f, &sm.psnr);
    sm.step = state_.step;
    sm.skipped = last_skipped_;
    sm.ms = std::chrono::duration<double, std::milli>(clock::now() - ts).count();
    em.mean_loss += sm.loss;
    em.mean_psnr += sm.psnr;
    if (cb.on_step)
      cb.on_step(sm);
  }
  em.mean_loss /= double(order.size());
  em.mean_psnr /= double(order.size());
  em.ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  state_.epoch = epoch;
  if (cb.on_epoch)
    cb.on_epoch(em, model_, state_);
  return em;
}

void Trainer::run(const TrainCallbacks &cb) {
  while (state_.epoch < cfg_.epochs)
    run_epoch(cb);
}

Image render_dataset_view(const Dataset &ds, std::span<const SkinnedGaussianModel *const> models, int camera,
                          int frame, bool use_ao, ThreadPool *pool, const RasterConfig &raster) {
  if (static_cast<int>(models.size()) != ds.avatar_count)
    throw Error(ErrorCode::Configuration, "dataset has " + std::to_string(ds.avatar_count) + " avatars but " +
                                              std::to_string(models.size()) + " models were given");
  std::vector<AvatarInstance> inst;
  for (std::size_t a = 0; a < models.size(); ++a) {
    check_compatible(ds, *models[a]);
    inst.push_back({models[a], ds.frames[std::size_t(frame)].poses[a], use_ao});
  }
  const Camera &cam = ds.cameras[std::size_t(camera)].camera;
  FrameBuffers fb = render_avatars(inst, cam, ds.background, RenderOptions{raster, pool});
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.data = std::move(fb.color);
  return img;
}

std::vector<ViewMetrics> evaluate(const Dataset &ds, std::span<const SkinnedGaussianModel *const> models,
                                  const std::string &split, bool use_ao, int threads, const RasterConfig &raster) {
  if (ds.images.size() != ds.frames.size())
    throw Error(ErrorCode::Configuration, "dataset was loaded without images");
  const std::vector<int> cams = ds.cameras_in_split(split);
  if (cams.empty())
    throw Error(ErrorCode::Configuration, "dataset has no cameras in split '" + split + "'");
  std::unique_ptr<ThreadPool> pool;
  if (threads > 1)
    pool = std::make_unique<ThreadPool>(threads);
  std::vector<ViewMetrics> out;
  for (int f = 0; f < static_cast<int>(ds.frames.size()); ++f)
    for (int c : cams) {
      const Image img = quantize_srgb8(render_dataset_view(ds, models, c, f, use_ao, pool.get(), raster).view());
      const ImageView gt = ds.images[std::size_t(f)][std::size_t(c)].view();
      out.push_back({c, f, psnr_capped(img.view(), gt), ssim(img.view(), gt)});
    }
  return out;
}

} // namespace avsplat

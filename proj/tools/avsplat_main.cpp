// avsplat command-line entry point: synth, train, render, eval, export.

#include "avsplat/checkpoint.hpp"
#include "avsplat/image_io.hpp"
#include "avsplat/ply.hpp"
#include "avsplat/settings.hpp"
#include "avsplat/synth.hpp"
#include "avsplat/template_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace avsplat;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
  case ErrorCode::Configuration:
    return kUsage;
  case ErrorCode::Numeric:
    return kNumeric;
  case ErrorCode::Internal:
    return kInternal;
  default:
    return kData;
  }
}

// Options every subcommand shares.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App *app, Common &c) {
  app->add_option("--config", c.config, "Key/value config file ([section] headers, key = value)");
  app->add_option("--set", c.sets, "Override a setting, KEY=VALUE (repeatable; wins over --config)");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads (1 = determinism reference)")->check(CLI::PositiveNumber);
}

Settings load_settings(const Common &c) {
  Settings s;
  if (!c.config.empty())
    apply_settings(s, load_config_file(c.config));
  for (const std::string &kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::Configuration, "--set expects KEY=VALUE, got '" + kv + "'");
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  s.train.threads = c.threads;
  return s;
}

std::vector<const SkinnedGaussianModel *> model_ptrs(const std::vector<Checkpoint> &cks) {
  std::vector<const SkinnedGaussianModel *> out;
  for (const Checkpoint &c : cks)
    out.push_back(&c.model);
  return out;
}

std::vector<Checkpoint> load_checkpoints(const std::vector<std::string> &paths) {
  std::vector<Checkpoint> out;
  for (const std::string &p : paths)
    out.push_back(load_checkpoint(p));
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  Common common;
  std::string out;
};

int run_synth(const SynthArgs &a) {
  Settings s = load_settings(a.common);
  if (a.common.seed)
    s.synth.seed = *a.common.seed;
  const SynthScene scene = generate_synthetic_dataset(s.synth, a.out);
  std::printf("wrote %s: %zu cameras (%zu test), %zu frames, %d avatar(s), %zu points, template %zu vertices\n",
              a.out.c_str(), scene.dataset.cameras.size(), scene.dataset.cameras_in_split("test").size(),
              scene.dataset.frames.size(), scene.dataset.avatar_count, scene.ground_truth[0].model.size(),
              scene.template_model.vertex_count());
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string dataset, tmpl, checkpoint, out, metrics, sh_mode;
  std::optional<int> epochs, ao_start_epoch;
  std::optional<double> lambda;
  bool no_ao = false;
  bool no_optimizer_state = false;
  bool save_epochs = false;
};

int run_train(const TrainArgs &a) {
  Settings s = load_settings(a.common);
  if (a.common.seed)
    s.train.seed = s.init.seed = *a.common.seed;
  if (a.epochs)
    s.train.epochs = *a.epochs;
  if (a.ao_start_epoch)
    s.train.ao_start_epoch = *a.ao_start_epoch;
  if (a.lambda)
    s.train.loss.lambda = *a.lambda;
  if (!a.sh_mode.empty())
    s.init.sh_mode = parse_sh_mode(a.sh_mode);
  if (a.no_ao)
    s.train.use_ao = false;
  s.train.validate();

  const Dataset ds = load_dataset(a.dataset);
  SkinnedGaussianModel model;
  TrainState state;
  if (!a.checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    model = std::move(ck.model);
    if (ck.train)
      state = std::move(*ck.train);
  } else if (!a.tmpl.empty()) {
    model = init_from_skinned_model(load_template(a.tmpl), s.init);
  } else {
    throw Error(ErrorCode::Configuration, "train needs --template or --checkpoint");
  }

  const std::string metrics_path = a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics;
  std::ofstream log(metrics_path, std::ios::app);
  if (!log)
    throw Error(ErrorCode::Io, metrics_path + ": cannot open metrics log");

  const std::string echo = settings_to_json(s);
  auto save = [&](const SkinnedGaussianModel &m, const TrainState &st, const std::string &path) {
    Checkpoint ck;
    ck.model = m;
    if (!a.no_optimizer_state)
      ck.train = st;
    ck.config_json = echo;
    ck.seed = s.train.seed;
    save_checkpoint(ck, path);
  };

  Trainer trainer(ds, std::move(model), s.train, std::move(state));
  TrainCallbacks cb;
  cb.on_step = [&](const StepMetrics &m) {
    json j{{"type", "step"}, {"step", m.step},  {"epoch", m.epoch}, {"camera", m.camera},
           {"frame", m.frame}, {"loss", m.loss}, {"psnr", m.psnr},   {"ms", m.ms}};
    if (!m.skipped.empty())
      j["skipped"] = m.skipped;
    log << j.dump() << "\n";
  };
  cb.on_epoch = [&](const EpochMetrics &e, const SkinnedGaussianModel &m, const TrainState &st) {
    log << json{{"type", "epoch"}, {"epoch", e.epoch},         {"loss", e.mean_loss},
                {"psnr", e.mean_psnr}, {"ao_active", e.ao_active}, {"ms", e.ms}}
               .dump()
        << "\n";
    log.flush();
    std::fprintf(stderr, "epoch %d: loss %.6f  psnr %.3f dB  ao %s  (%.1f s)\n", e.epoch, e.mean_loss, e.mean_psnr,
                 e.ao_active ? "on" : "off", e.ms / 1000.0);
    if (a.save_epochs)
      save(m, st, a.out + ".epoch" + std::to_string(e.epoch));
  };
  trainer.run(cb);
  save(trainer.model(), trainer.state(), a.out);
  std::printf("wrote %s after %d epoch(s), %llu step(s)\n", a.out.c_str(), trainer.state().epoch,
              static_cast<unsigned long long>(trainer.state().step));
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  Common common;
  std::vector<std::string> checkpoints;
  std::string dataset, poses, camera, out;
  std::optional<int> frame;
  bool no_ao = false;
};

int run_render(const RenderArgs &a) {
  const Settings s = load_settings(a.common);
  const std::vector<Checkpoint> cks = load_checkpoints(a.checkpoints);
  Dataset ds = load_dataset(a.dataset, false);
  if (!a.poses.empty()) {
    // Novel poses replace the dataset's frames; cameras stay.
    const auto frames = load_pose_file(a.poses);
    ds.frames.clear();
    for (std::size_t f = 0; f < frames.size(); ++f) {
      DatasetFrame fr;
      fr.timestamp = double(f);
      fr.poses = frames[f];
      if (static_cast<int>(fr.poses.size()) != ds.avatar_count)
        throw Error(ErrorCode::Schema, a.poses + ": frame " + std::to_string(f) + " has " +
                                           std::to_string(fr.poses.size()) + " poses, expected " +
                                           std::to_string(ds.avatar_count));
      ds.frames.push_back(std::move(fr));
    }
    if (!frames.empty())
      ds.bone_count = static_cast<int>(frames[0][0].euler.size());
  }
  std::vector<int> cams;
  if (a.camera.empty()) {
    for (std::size_t c = 0; c < ds.cameras.size(); ++c)
      cams.push_back(static_cast<int>(c));
  } else {
    const int c = ds.find_camera(a.camera);
    if (c < 0)
      throw Error(ErrorCode::Configuration, "unknown camera '" + a.camera + "'");
    cams.push_back(c);
  }
  std::vector<int> frames;
  if (a.frame) {
    if (*a.frame < 0 || *a.frame >= static_cast<int>(ds.frames.size()))
      throw Error(ErrorCode::Configuration, "frame " + std::to_string(*a.frame) + " out of range");
    frames.push_back(*a.frame);
  } else {
    for (std::size_t f = 0; f < ds.frames.size(); ++f)
      frames.push_back(static_cast<int>(f));
  }
  fs::create_directories(a.out);
  std::unique_ptr<ThreadPool> pool;
  if (a.common.threads > 1)
    pool = std::make_unique<ThreadPool>(a.common.threads);
  const auto models = model_ptrs(cks);
  for (int f : frames)
    for (int c : cams) {
      const Image img = render_dataset_view(ds, models, c, f, !a.no_ao, pool.get(), s.train.raster);
      save_png(fs::path(a.out) / ("cam" + std::to_string(c) + "_frame" + std::to_string(f) + ".png"), img.view());
    }
  std::printf("rendered %zu image(s) to %s\n", frames.size() * cams.size(), a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::vector<std::string> checkpoints;
  std::string dataset, split = "test", out;
  bool no_ao = false;
};

int run_eval(const EvalArgs &a) {
  const Settings s = load_settings(a.common);
  const std::vector<Checkpoint> cks = load_checkpoints(a.checkpoints);
  const Dataset ds = load_dataset(a.dataset);
  if (a.split != "train" && a.split != "test" && a.split != "all")
    throw Error(ErrorCode::Configuration, "--split must be train, test or all");
  const auto models = model_ptrs(cks);
  const std::vector<ViewMetrics> views = evaluate(ds, models, a.split, !a.no_ao, a.common.threads, s.train.raster);
  json rows = json::array();
  double sum_p = 0.0, sum_s = 0.0;
  for (const ViewMetrics &v : views) {
    rows.push_back(json{{"camera", ds.cameras[std::size_t(v.camera)].id}, {"frame", v.frame}, {"psnr", v.psnr},
                        {"ssim", v.ssim}});
    sum_p += v.psnr;
    sum_s += v.ssim;
  }
  const double n = double(views.size());
  const json report{{"split", a.split},
                    {"views", rows},
                    {"mean", json{{"psnr", sum_p / n}, {"ssim", sum_s / n}, {"count", views.size()}}}};
  const std::string text = report.dump(2);
  std::printf("%s\n", text.c_str());
  if (!a.out.empty()) {
    std::ofstream o(a.out, std::ios::trunc);
    o << text << "\n";
    if (!o)
      throw Error(ErrorCode::Io, a.out + ": cannot write report");
  }
  return kOk;
}

// ---------------------------------------------------------------- export

struct ExportArgs {
  Common common;
  std::string checkpoint, dataset, poses, out;
  std::optional<int> frame;
};

int run_export(const ExportArgs &a) {
  (void)load_settings(a.common);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::optional<Pose> pose;
  if (a.frame) {
    std::vector<std::vector<Pose>> frames;
    if (!a.poses.empty()) {
      frames = load_pose_file(a.poses);
    } else if (!a.dataset.empty()) {
      const Dataset ds = load_dataset(a.dataset, false);
      for (const DatasetFrame &fr : ds.frames)
        frames.push_back(fr.poses);
    } else {
      throw Error(ErrorCode::Configuration, "--frame needs --poses or --dataset");
    }
    if (*a.frame < 0 || *a.frame >= static_cast<int>(frames.size()))
      throw Error(ErrorCode::Configuration, "frame " + std::to_string(*a.frame) + " out of range");
    pose = frames[std::size_t(*a.frame)][0];
  }
  export_ply(ck.model, pose, a.out);
  std::printf("wrote %zu points to %s (%s)\n", ck.model.size(), a.out.c_str(), pose ? "posed" : "canonical");
  return kOk;
}

std::string settings_help() {
  std::string s = "Settings (--config file keys and --set KEY=VALUE):\n";
  for (const SettingInfo &i : setting_catalog())
    s += "  " + i.key + std::string(i.key.size() < 30 ? 30 - i.key.size() : 1, ' ') + i.help + "\n";
  return s;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"avsplat: animatable Gaussian avatars on the CPU"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.\n"
             "Run 'avsplat help-settings' for the list of configuration keys.");

  SynthArgs sa;
  CLI::App *synth = app.add_subcommand("synth", "Generate a synthetic dataset with its ground-truth checkpoint");
  add_common(synth, sa.common);
  synth->add_option("--out", sa.out, "Output dataset directory")->required();

  TrainArgs ta;
  CLI::App *train = app.add_subcommand("train", "Fit a skinned Gaussian avatar to a dataset");
  add_common(train, ta.common);
  train->add_option("--dataset", ta.dataset, "Dataset directory (manifest.json)")->required();
  train->add_option("--template", ta.tmpl, "Template JSON used to initialize the model");
  train->add_option("--checkpoint", ta.checkpoint, "Resume from this checkpoint instead of a template");
  train->add_option("--out", ta.out, "Output checkpoint path")->required();
  train->add_option("--metrics", ta.metrics, "Metrics log (JSON lines); default <out>.metrics.jsonl");
  train->add_option("--epochs", ta.epochs, "Total epochs to reach")->check(CLI::NonNegativeNumber);
  train->add_option("--ao-start-epoch", ta.ao_start_epoch, "1-based epoch at which AO starts training")
      ->check(CLI::PositiveNumber);
  train->add_option("--lambda", ta.lambda, "D-SSIM weight in [0, 1]");
  train->add_option("--sh-mode", ta.sh_mode, "Color source for new models")->check(CLI::IsMember({"hash", "uv"}));
  train->add_flag("--no-ao", ta.no_ao, "Never train or use the AO field");
  train->add_flag("--no-optimizer-state", ta.no_optimizer_state, "Omit optimizer state from saved checkpoints");
  train->add_flag("--save-epochs", ta.save_epochs, "Also write <out>.epochN after every epoch");

  RenderArgs ra;
  CLI::App *render = app.add_subcommand("render", "Render checkpoints from dataset cameras");
  add_common(render, ra.common);
  render->add_option("--checkpoint", ra.checkpoints, "Checkpoint, one per avatar (repeatable)")->required();
  render->add_option("--dataset", ra.dataset, "Dataset providing cameras and default poses")->required();
  render->add_option("--poses", ra.poses, "Pose file replacing the dataset poses");
  render->add_option("--camera", ra.camera, "Camera id or index (default: all)");
  render->add_option("--frame", ra.frame, "Frame index (default: all)");
  render->add_option("--out", ra.out, "Output directory for PNG images")->required();
  render->add_flag("--no-ao", ra.no_ao, "Force ao = 1 (novel poses without timestamps)");

  EvalArgs ea;
  CLI::App *eval = app.add_subcommand("eval", "Report PSNR and SSIM against dataset images");
  add_common(eval, ea.common);
  eval->add_option("--checkpoint", ea.checkpoints, "Checkpoint, one per avatar (repeatable)")->required();
  eval->add_option("--dataset", ea.dataset, "Dataset directory")->required();
  eval->add_option("--split", ea.split, "Cameras to evaluate")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--out", ea.out, "Also write the JSON report here");
  eval->add_flag("--no-ao", ea.no_ao, "Force ao = 1");

  ExportArgs xa;
  CLI::App *exp = app.add_subcommand("export", "Write a checkpoint as an ASCII PLY point cloud");
  add_common(exp, xa.common);
  exp->add_option("--checkpoint", xa.checkpoint, "Checkpoint to export")->required();
  exp->add_option("--out", xa.out, "Output .ply path")->required();
  exp->add_option("--frame", xa.frame, "Pose the points with this frame (canonical when omitted)");
  exp->add_option("--poses", xa.poses, "Pose file used with --frame");
  exp->add_option("--dataset", xa.dataset, "Dataset whose poses are used with --frame");

  app.add_subcommand("help-settings", "List every configuration key")->callback([] {
    std::printf("%s", settings_help().c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed())
      return run_synth(sa);
    if (train->parsed())
      return run_train(ta);
    if (render->parsed())
      return run_render(ra);
    if (eval->parsed())
      return run_eval(ea);
    if (exp->parsed())
      return run_export(xa);
    return kOk;
  } catch (const Error &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
}

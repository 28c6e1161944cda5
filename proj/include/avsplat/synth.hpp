#pragma once

#include "avsplat/checkpoint.hpp"
#include "avsplat/dataset.hpp"
#include "avsplat/template_model.hpp"

#include <filesystem>

namespace avsplat {

/// Parameters of the synthetic avatar scene: a chain of capsules along +y
/// seen by a ring of cameras plus held-out views.
struct SynthConfig {
  int bones = 3;
  int points = 5000;           // ground-truth Gaussians
  int template_vertices = 240; // vertices of the released template
  int cameras = 6;             // training ring
  int test_cameras = 1;        // held-out views between ring cameras
  int frames = 24;
  int width = 128, height = 128;
  double focal = 240.0;
  double camera_distance = 3.0;
  double bone_length = 0.4;
  double limb_radius = 0.13;
  double motion_amplitude = 0.5; // radians
  double ao_dimming = 0.0;       // relative amplitude of the global AO pulse; 0 disables AO
  double ao_mean = 0.7;
  double template_noise = 0.02; // meters, Gaussian vertex noise on the released template
  bool uv = false;              // give the template cylindrical UVs
  int avatars = 1;
  double avatar_spacing = 0.7; // x offset between avatars
  Vec3 background = Vec3::Zero();
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthScene {
  Dataset dataset;                        // with images
  std::vector<Checkpoint> ground_truth;   // one per avatar
  TemplateModel clean_template;           // exact rest-pose vertices
  TemplateModel template_model;           // with template_noise applied
};

SynthScene generate_synthetic_scene(const SynthConfig &cfg);

/// Writes the dataset, template.json, ground_truth[_aN].ckpt and synth.json into dir.
SynthScene generate_synthetic_dataset(const SynthConfig &cfg, const std::filesystem::path &dir);

/// Ground-truth checkpoint file name for avatar a.
std::string ground_truth_name(int avatar);

} // namespace avsplat

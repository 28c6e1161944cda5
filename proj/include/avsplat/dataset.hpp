#pragma once

#include "avsplat/camera.hpp"
#include "avsplat/image.hpp"
#include "avsplat/skinning.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace avsplat {

struct DatasetCamera {
  std::string id;
  std::string split = "train"; // "train" or "test"
  Camera camera;
};

struct DatasetFrame {
  double timestamp = 0.0;          // as stored in the manifest
  std::vector<Pose> poses;         // one per avatar; Pose::time is the normalized timestamp
  std::vector<std::string> images; // one per camera, relative to the dataset root
};

/// A posed multi-view sequence. images[f][c] is frame f seen by camera c, in
/// linear color (empty when loaded without pixels).
struct Dataset {
  std::filesystem::path root;
  int avatar_count = 1;
  int bone_count = 0;
  Vec3 background = Vec3::Zero();
  std::vector<DatasetCamera> cameras;
  std::vector<DatasetFrame> frames;
  std::vector<std::vector<Image>> images;

  /// Index of the camera with this id, or of the decimal index itself; -1 if none.
  int find_camera(const std::string &id_or_index) const;
  std::vector<int> cameras_in_split(const std::string &split) const;
};

inline constexpr int kDatasetVersion = 1;

/// Standard image path for camera c, frame f.
std::string dataset_image_name(int camera, int frame);

/// Maps raw timestamps to [0, 1] (first -> 0, last -> 1; a single frame -> 0).
std::vector<double> normalize_timestamps(const std::vector<double> &ts);

/// Reads manifest.json, poses.json and (optionally) every image, validating eagerly.
Dataset load_dataset(const std::filesystem::path &dir, bool load_images = true);

/// Writes manifest.json and poses.json; images are written from ds.images when present.
void save_dataset(const Dataset &ds, const std::filesystem::path &dir);

/// Pose list file: {"bone_count": n, "frames": [{"time": t?, "avatars": [{"euler": [...], "translation": [...]}]}]}.
std::vector<std::vector<Pose>> load_pose_file(const std::filesystem::path &path);

} // namespace avsplat

#pragma once

#include "avsplat/train.hpp"

#include <filesystem>
#include <optional>

namespace avsplat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model snapshot plus, optionally, the optimizer state needed to resume.
struct Checkpoint {
  SkinnedGaussianModel model;
  std::optional<TrainState> train;
  std::string config_json = "{}"; // echo of the training configuration
  std::uint64_t seed = 0;
};

/// Layout: "AVSPLATK", u32 version, u32 header length, JSON header, raw
/// little-endian f64 sections in header order, u32 CRC-32 of all prior bytes.
void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
/// Throws UnsupportedVersion for unknown versions and Corrupt for truncated
/// or damaged files; nothing is returned on failure.
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace avsplat

#pragma once

#include "avsplat/image.hpp"

namespace avsplat {

struct LossConfig {
  double lambda = 0.2; // weight of the D-SSIM term
  int ssim_window = 11;
  double ssim_sigma = 1.5;

  void validate() const;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kPsnrCap = 99.0;

/// Mean absolute difference. When grad is given, dL/dimg is written to it.
double l1_loss(ImageView img, ImageView gt, std::vector<double> *grad = nullptr);

/// Mean SSIM over pixels and channels with a normalized Gaussian window and
/// zero padding at the borders.
double ssim(ImageView img, ImageView gt, const LossConfig &cfg = {}, std::vector<double> *grad = nullptr);

/// (1 - SSIM) / 2.
double dssim_loss(ImageView img, ImageView gt, const LossConfig &cfg = {}, std::vector<double> *grad = nullptr);

/// (1 - lambda) L1 + lambda D-SSIM.
double total_loss(ImageView img, ImageView gt, const LossConfig &cfg = {}, std::vector<double> *grad = nullptr);

/// 10 log10(1 / MSE); +infinity for identical images.
double psnr(ImageView img, ImageView gt);
/// psnr() clamped to kPsnrCap for logs and reports.
double psnr_capped(ImageView img, ImageView gt);

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_window(int size, double sigma);

} // namespace avsplat

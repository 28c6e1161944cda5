#include "avsplat/loss.hpp"

#include <limits>

namespace avsplat {

namespace {

void check_same(ImageView a, ImageView b, const char *what) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size() ||
      a.data.size() != 3 * a.pixel_count())
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": images differ in size (" +
                                                  std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                                  std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
}

// Zero-padded "same" separable convolution of a W x H plane.
void blur(const std::vector<double> &in, std::vector<double> &out, std::vector<double> &tmp, int w, int h,
          const std::vector<double> &k) {
  const int r = static_cast<int>(k.size()) / 2;
  tmp.assign(in.size(), 0.0);
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int xx = x + t;
        if (xx >= 0 && xx < w)
          s += k[std::size_t(t + r)] * in[std::size_t(y) * w + xx];
      }
      tmp[std::size_t(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int yy = y + t;
        if (yy >= 0 && yy < h)
          s += k[std::size_t(t + r)] * tmp[std::size_t(yy) * w + x];
      }
      out[std::size_t(y) * w + x] = s;
    }
}

} // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::Configuration, "lambda must be in [0, 1]");
  if (ssim_window < 1 || ssim_window % 2 == 0 || !(ssim_sigma > 0.0))
    throw Error(ErrorCode::Configuration, "ssim window must be odd and sigma positive");
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[std::size_t(i)] = std::exp(-double((i - r) * (i - r)) / (2.0 * sigma * sigma));
    sum += k[std::size_t(i)];
  }
  for (double &v : k)
    v /= sum;
  return k;
}

double l1_loss(ImageView img, ImageView gt, std::vector<double> *grad) {
  check_same(img, gt, "l1_loss");
  const double inv_n = 1.0 / double(img.data.size());
  double s = 0.0;
  if (grad)
    grad->assign(img.data.size(), 0.0);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = img.data[i] - gt.data[i];
    s += std::abs(d);
    if (grad)
      (*grad)[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  return s * inv_n;
}

double ssim(ImageView img, ImageView gt, const LossConfig &cfg, std::vector<double> *grad) {
  check_same(img, gt, "ssim");
  cfg.validate();
  const int w = img.width, h = img.height;
  const std::size_t np = img.pixel_count();
  const std::vector<double> k = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
  if (grad)
    grad->assign(img.data.size(), 0.0);

  std::vector<double> x(np), y(np), tmp, mx, my, sxx, syy, sxy, buf(np);
  double total = 0.0;
  const double scale = 1.0 / (3.0 * double(np));
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < np; ++p) {
      x[p] = img.data[3 * p + c];
      y[p] = gt.data[3 * p + c];
    }
    blur(x, mx, tmp, w, h, k);
    blur(y, my, tmp, w, h, k);
    for (std::size_t p = 0; p < np; ++p)
      buf[p] = x[p] * x[p];
    blur(buf, sxx, tmp, w, h, k);
    for (std::size_t p = 0; p < np; ++p)
      buf[p] = y[p] * y[p];
    blur(buf, syy, tmp, w, h, k);
    for (std::size_t p = 0; p < np; ++p)
      buf[p] = x[p] * y[p];
    blur(buf, sxy, tmp, w, h, k);

    std::vector<double> ga, gb, gc;
    if (grad) {
      ga.resize(np);
      gb.resize(np);
      gc.resize(np);
    }
    for (std::size_t p = 0; p < np; ++p) {
      const double vx = sxx[p] - mx[p] * mx[p];
      const double vy = syy[p] - my[p] * my[p];
      const double cxy = sxy[p] - mx[p] * my[p];
      const double n1 = 2 * mx[p] * my[p] + kSsimC1, n2 = 2 * cxy + kSsimC2;
      const double d1 = mx[p] * mx[p] + my[p] * my[p] + kSsimC1, d2 = vx + vy + kSsimC2;
      const double s = n1 * n2 / (d1 * d2);
      total += s;
      if (grad) {
        const double ds_dmx = 2 * my[p] * n2 / (d1 * d2) - s * 2 * mx[p] / d1;
        const double ds_dvx = -s / d2;
        const double ds_dcxy = 2 * n1 / (d1 * d2);
        ga[p] = ds_dmx - 2 * mx[p] * ds_dvx - my[p] * ds_dcxy;
        gb[p] = ds_dvx;
        gc[p] = ds_dcxy;
      }
    }
    if (grad) {
      std::vector<double> ba, bb, bc;
      blur(ga, ba, tmp, w, h, k);
      blur(gb, bb, tmp, w, h, k);
      blur(gc, bc, tmp, w, h, k);
      for (std::size_t p = 0; p < np; ++p)
        (*grad)[3 * p + c] = scale * (ba[p] + 2 * x[p] * bb[p] + y[p] * bc[p]);
    }
  }
  return total * scale;
}

double dssim_loss(ImageView img, ImageView gt, const LossConfig &cfg, std::vector<double> *grad) {
  const double s = ssim(img, gt, cfg, grad);
  if (grad)
    for (double &g : *grad)
      g *= -0.5;
  return 0.5 * (1.0 - s);
}

double total_loss(ImageView img, ImageView gt, const LossConfig &cfg, std::vector<double> *grad) {
  cfg.validate();
  if (!grad)
    return (1.0 - cfg.lambda) * l1_loss(img, gt) + cfg.lambda * dssim_loss(img, gt, cfg);
  std::vector<double> g1, g2;
  const double l1 = l1_loss(img, gt, &g1);
  const double ds = dssim_loss(img, gt, cfg, &g2);
  grad->resize(g1.size());
  for (std::size_t i = 0; i < g1.size(); ++i)
    (*grad)[i] = (1.0 - cfg.lambda) * g1[i] + cfg.lambda * g2[i];
  return (1.0 - cfg.lambda) * l1 + cfg.lambda * ds;
}

double psnr(ImageView img, ImageView gt) {
  check_same(img, gt, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = img.data[i] - gt.data[i];
    se += d * d;
  }
  const double mse = se / double(img.data.size());
  if (mse == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr_capped(ImageView img, ImageView gt) { return std::min(psnr(img, gt), kPsnrCap); }

} // namespace avsplat

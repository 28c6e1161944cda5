#include "avsplat/hash_grid.hpp"

#include <algorithm>

namespace avsplat {

namespace {

constexpr std::uint32_t kPrimes[3] = {1u, 2654435761u, 805459861u};

struct Cell {
  std::uint32_t base[3];
  double frac[3];
};

Cell locate(const Vec3 &x, int resolution) {
  Cell c;
  for (int a = 0; a < 3; ++a) {
    const double p = std::clamp(x[a], 0.0, 1.0) * resolution;
    const int i = std::clamp(static_cast<int>(std::floor(p)), 0, resolution - 1);
    c.base[a] = static_cast<std::uint32_t>(i);
    c.frac[a] = p - i;
  }
  return c;
}

} // namespace

double HashGridConfig::growth() const {
  if (levels <= 1)
    return 1.0;
  return std::exp((std::log(double(finest_resolution)) - std::log(double(base_resolution))) / (levels - 1));
}

void HashGridConfig::validate() const {
  if (levels < 1 || features < 1 || base_resolution < 1 || finest_resolution < base_resolution)
    throw Error(ErrorCode::Configuration, "hash grid: invalid level/feature/resolution settings");
  if (levels > 1 && !(growth() > 1.0))
    throw Error(ErrorCode::Configuration, "hash grid: growth factor must exceed 1");
  if (log2_table_size < 4 || log2_table_size > 24)
    throw Error(ErrorCode::Configuration, "hash grid: log2 table size out of range");
}

HashGrid::HashGrid(const HashGridConfig &cfg) : cfg_(cfg) {
  cfg_.validate();
  const double b = cfg_.growth();
  std::size_t offset = 0;
  for (int l = 0; l < cfg_.levels; ++l) {
    const int res = static_cast<int>(std::floor(cfg_.base_resolution * std::pow(b, l) + 1e-9));
    const std::size_t dense_rows = std::size_t(res + 1) * std::size_t(res + 1) * std::size_t(res + 1);
    const bool dense = dense_rows <= cfg_.table_size();
    const std::size_t rows = dense ? dense_rows : cfg_.table_size();
    levels_.push_back({res, offset, rows, dense});
    offset += rows;
  }
  rows_ = offset;
  params_.assign(rows_ * cfg_.features, 0.0);
}

void HashGrid::init_uniform(std::mt19937_64 &rng, double range) {
  std::uniform_real_distribution<double> u(-range, range);
  for (double &v : params_)
    v = u(rng);
}

std::uint32_t HashGrid::vertex_row(int level, std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
  const Level &lv = levels_[level];
  std::uint32_t local;
  if (lv.dense) {
    const std::uint32_t stride = static_cast<std::uint32_t>(lv.resolution + 1);
    local = ix + iy * stride + iz * stride * stride;
  } else {
    local = (ix * kPrimes[0] ^ iy * kPrimes[1] ^ iz * kPrimes[2]) & static_cast<std::uint32_t>(lv.rows - 1);
  }
  return static_cast<std::uint32_t>(lv.offset + local);
}

void HashGrid::encode(const Vec3 &x, double *out) const {
  const int nf = cfg_.features;
  for (int l = 0; l < cfg_.levels; ++l) {
    const Cell c = locate(x, levels_[l].resolution);
    double *o = out + l * nf;
    std::fill_n(o, nf, 0.0);
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::uint32_t idx[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (corner >> a) & 1;
        w *= hi ? c.frac[a] : 1.0 - c.frac[a];
        idx[a] = c.base[a] + (hi ? 1u : 0u);
      }
      const double *f = params_.data() + std::size_t(vertex_row(l, idx[0], idx[1], idx[2])) * nf;
      for (int k = 0; k < nf; ++k)
        o[k] += w * f[k];
    }
  }
}

Vec3 HashGrid::backward(const Vec3 &x, const double *d_out, RowGradient &grad) const {
  const int nf = cfg_.features;
  Vec3 dx = Vec3::Zero();
  for (int l = 0; l < cfg_.levels; ++l) {
    const int res = levels_[l].resolution;
    const Cell c = locate(x, res);
    const double *g = d_out + l * nf;
    for (int corner = 0; corner < 8; ++corner) {
      double w[3];
      std::uint32_t idx[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (corner >> a) & 1;
        w[a] = hi ? c.frac[a] : 1.0 - c.frac[a];
        idx[a] = c.base[a] + (hi ? 1u : 0u);
      }
      const std::uint32_t r = vertex_row(l, idx[0], idx[1], idx[2]);
      grad.add(r, g, w[0] * w[1] * w[2]);
      const double *f = params_.data() + std::size_t(r) * nf;
      double gf = 0.0;
      for (int k = 0; k < nf; ++k)
        gf += g[k] * f[k];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (corner >> a) & 1;
        dx[a] += gf * (hi ? 1.0 : -1.0) * res * w[(a + 1) % 3] * w[(a + 2) % 3];
      }
    }
  }
  for (int a = 0; a < 3; ++a)
    if (x[a] < 0.0 || x[a] > 1.0)
      dx[a] = 0.0;
  return dx;
}

} // namespace avsplat

#include "avsplat/fields.hpp"

#include <algorithm>

namespace avsplat {

Vec3 Aabb::to_unit(const Vec3 &x) const {
  const Vec3 u = (x - min).cwiseQuotient(extent());
  return u.cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 Aabb::to_unit_derivative(const Vec3 &x) const {
  const Vec3 e = extent();
  const Vec3 u = (x - min).cwiseQuotient(e);
  Vec3 d;
  for (int a = 0; a < 3; ++a)
    d[a] = (u[a] < 0.0 || u[a] > 1.0) ? 0.0 : 1.0 / e[a];
  return d;
}

void FieldBankConfig::validate() const {
  sh_grid.validate();
  displacement_grid.validate();
  ao_grid.validate();
  if (hidden_width <= 0 || hidden_layers < 0)
    throw Error(ErrorCode::Configuration, "field mlp shape");
  if (time_frequencies < 0)
    throw Error(ErrorCode::Configuration, "time_frequencies must be >= 0");
  if (!std::isfinite(ao_bias))
    throw Error(ErrorCode::Configuration, "ao_bias must be finite");
  if (!(max_displacement > 0.0))
    throw Error(ErrorCode::Configuration, "max_displacement must be positive");
  if ((atlas_width > 0) != (atlas_height > 0))
    throw Error(ErrorCode::Configuration, "atlas width and height must both be set");
}

std::vector<double> positional_encode_time(double t, int n_freq) {
  std::vector<double> out(2 * std::size_t(n_freq));
  for (int k = 0; k < n_freq; ++k) {
    const double arg = std::ldexp(M_PI * t, k);
    out[2 * k] = std::sin(arg);
    out[2 * k + 1] = std::cos(arg);
  }
  return out;
}

NeuralField::NeuralField(const HashGridConfig &g, int hidden_width, int hidden_layers, int extra, int output_width)
    : grid(g), mlp(MlpConfig{g.output_width() + extra, hidden_width, hidden_layers, output_width}),
      extra_inputs(extra) {}

Eigen::MatrixXd NeuralField::forward(const Eigen::MatrixXd &unit_positions, const Eigen::MatrixXd *extra,
                                     Batch *batch) const {
  const Eigen::Index n = unit_positions.cols();
  const int enc_w = grid.config().output_width();
  Eigen::MatrixXd input(enc_w + extra_inputs, n);
  for (Eigen::Index i = 0; i < n; ++i)
    grid.encode(unit_positions.col(i), input.col(i).data());
  if (extra_inputs > 0) {
    if (!extra || extra->rows() != extra_inputs || extra->cols() != n)
      throw Error(ErrorCode::Configuration, "field extra input shape");
    input.bottomRows(extra_inputs) = *extra;
  }
  if (batch) {
    batch->unit_positions = unit_positions;
    return mlp.forward(input, &batch->cache);
  }
  return mlp.forward(input);
}

Eigen::MatrixXd NeuralField::backward(const Batch &batch, const Eigen::MatrixXd &d_output, RowGradient &table_grad,
                                      std::span<double> mlp_grad) const {
  const Eigen::MatrixXd d_in = mlp.backward(batch.cache, d_output, mlp_grad);
  const Eigen::Index n = batch.unit_positions.cols();
  Eigen::MatrixXd d_pos(3, n);
  for (Eigen::Index i = 0; i < n; ++i)
    d_pos.col(i) = grid.backward(batch.unit_positions.col(i), d_in.col(i).data(), table_grad);
  return d_pos;
}

UvAtlas::UvAtlas(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::Configuration, "atlas dimensions must be positive");
  params_.assign(std::size_t(width) * height * kShScalars, 0.0);
}

UvAtlas::Taps UvAtlas::taps(const Vec2 &uv) const {
  auto axis = [](double c, int n, int &i0, int &i1, double &f) {
    const double p = std::clamp(c * n - 0.5, 0.0, double(n - 1));
    i0 = std::min(static_cast<int>(std::floor(p)), std::max(n - 2, 0));
    i1 = std::min(i0 + 1, n - 1);
    f = p - i0;
  };
  int x0, x1, y0, y1;
  double fx, fy;
  axis(uv.x(), width_, x0, x1, fx);
  axis(uv.y(), height_, y0, y1, fy);
  Taps t;
  t.idx[0] = y0 * width_ + x0;
  t.idx[1] = y0 * width_ + x1;
  t.idx[2] = y1 * width_ + x0;
  t.idx[3] = y1 * width_ + x1;
  t.w[0] = (1 - fx) * (1 - fy);
  t.w[1] = fx * (1 - fy);
  t.w[2] = (1 - fx) * fy;
  t.w[3] = fx * fy;
  return t;
}

ShCoefficients UvAtlas::sample(const Vec2 &uv) const {
  const Taps t = taps(uv);
  Eigen::Matrix<double, kShScalars, 1> acc = Eigen::Matrix<double, kShScalars, 1>::Zero();
  for (int k = 0; k < 4; ++k)
    acc += t.w[k] * Eigen::Map<const Eigen::Matrix<double, kShScalars, 1>>(params_.data() +
                                                                           std::size_t(t.idx[k]) * kShScalars);
  return sh_from_column(acc);
}

void UvAtlas::backward(const Vec2 &uv, const ShCoefficients &d_sh, RowGradient &grad) const {
  const Taps t = taps(uv);
  Eigen::Matrix<double, kShScalars, 1> g;
  sh_to_column(d_sh, g);
  for (int k = 0; k < 4; ++k)
    if (t.w[k] != 0.0)
      grad.add(static_cast<std::uint32_t>(t.idx[k]), g.data(), t.w[k]);
}

FieldBank::FieldBank(const FieldBankConfig &cfg, const Aabb &b, std::uint64_t seed) : bounds(b), cfg_(cfg) {
  cfg_.validate();
  sh = NeuralField(cfg_.sh_grid, cfg_.hidden_width, cfg_.hidden_layers, 0, kShScalars);
  displacement = NeuralField(cfg_.displacement_grid, cfg_.hidden_width, cfg_.hidden_layers, 0, 3);
  ao = NeuralField(cfg_.ao_grid, cfg_.hidden_width, cfg_.hidden_layers, 2 * cfg_.time_frequencies, 1);
  std::mt19937_64 rng(seed);
  for (NeuralField *f : {&sh, &displacement, &ao}) {
    f->grid.init_uniform(rng);
    f->mlp.init(rng);
  }
  ao.mlp.bias(ao.mlp.layer_count() - 1)[0] = cfg_.ao_bias;
  if (cfg_.atlas_width > 0)
    atlas = UvAtlas(cfg_.atlas_width, cfg_.atlas_height);
}

std::pair<ShCoefficients, Vec3> FieldBank::sample_shape_appearance(const Vec3 &x0) const {
  const Eigen::MatrixXd u = bounds.to_unit(x0);
  const Eigen::MatrixXd sh_out = sh.forward(u, nullptr);
  const Eigen::MatrixXd dx_out = displacement.forward(u, nullptr);
  const Vec3 dx = dx_out.col(0).array().tanh() * cfg_.max_displacement;
  return {sh_from_column(sh_out.col(0)), dx};
}

double FieldBank::sample_ao(const Vec3 &x0, double t, bool enabled) const {
  if (!enabled)
    return 1.0;
  const Eigen::MatrixXd u = bounds.to_unit(x0);
  const std::vector<double> gamma = positional_encode_time(t, cfg_.time_frequencies);
  const Eigen::MatrixXd extra = Eigen::Map<const Eigen::MatrixXd>(gamma.data(), Eigen::Index(gamma.size()), 1);
  return sigmoid(ao.forward(u, &extra)(0, 0));
}

ShCoefficients FieldBank::uv_sample_sh(const Vec2 &uv) const {
  if (!atlas)
    throw Error(ErrorCode::Configuration, "model has no UV atlas; use the hash-encoded SH field (sh_mode = hash)");
  return atlas->sample(uv);
}

ShCoefficients sh_from_column(const Eigen::Ref<const Eigen::VectorXd> &column) {
  ShCoefficients sh;
  for (int k = 0; k < kShCoeffs; ++k)
    for (int c = 0; c < 3; ++c)
      sh(k, c) = column[3 * k + c];
  return sh;
}

void sh_to_column(const ShCoefficients &sh, Eigen::Ref<Eigen::VectorXd> column) {
  for (int k = 0; k < kShCoeffs; ++k)
    for (int c = 0; c < 3; ++c)
      column[3 * k + c] = sh(k, c);
}

} // namespace avsplat

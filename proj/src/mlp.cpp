#include "avsplat/mlp.hpp"

namespace avsplat {

void MlpConfig::validate() const {
  if (input_width <= 0 || hidden_width <= 0 || output_width <= 0 || hidden_layers < 0)
    throw Error(ErrorCode::Configuration, "mlp widths must be positive");
}

Mlp::Mlp(const MlpConfig &cfg) : cfg_(cfg) {
  cfg_.validate();
  std::size_t off = 0;
  for (int l = 0; l < layer_count(); ++l) {
    offsets_.push_back(off);
    off += std::size_t(in_width(l)) * out_width(l) + out_width(l);
  }
  params_.assign(off, 0.0);
}

void Mlp::init(std::mt19937_64 &rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    const double r = std::sqrt(6.0 / (in_width(l) + out_width(l)));
    std::uniform_real_distribution<double> u(-r, r);
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = u(rng);
  }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) {
  return {params_.data() + offsets_[l], out_width(l), in_width(l)};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
  return {params_.data() + offsets_[l], out_width(l), in_width(l)};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
  return {params_.data() + offsets_[l] + std::size_t(in_width(l)) * out_width(l), out_width(l)};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
  return {params_.data() + offsets_[l] + std::size_t(in_width(l)) * out_width(l), out_width(l)};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd &input, Cache *cache) const {
  if (input.rows() != cfg_.input_width)
    throw Error(ErrorCode::Configuration, "mlp input width " + std::to_string(input.rows()) + ", expected " +
                                              std::to_string(cfg_.input_width));
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd h = input;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weight(l) * h;
    z.colwise() += bias(l);
    if (l < cfg_.hidden_layers) {
      z = z.cwiseMax(0.0);
      if (cache)
        cache->activations.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Cache &cache, const Eigen::MatrixXd &d_output, std::span<double> grad) const {
  if (grad.size() != params_.size())
    throw Error(ErrorCode::DimensionMismatch, "mlp gradient buffer size");
  Eigen::MatrixXd g = d_output;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const Eigen::MatrixXd &in = cache.activations[l];
    Eigen::Map<Eigen::MatrixXd> dw(grad.data() + offsets_[l], out_width(l), in_width(l));
    Eigen::Map<Eigen::VectorXd> db(grad.data() + offsets_[l] + std::size_t(in_width(l)) * out_width(l),
                                   out_width(l));
    dw.noalias() += g * in.transpose();
    db += g.rowwise().sum();
    Eigen::MatrixXd gin = weight(l).transpose() * g;
    if (l > 0)
      gin = (in.array() > 0.0).select(gin, 0.0);
    g = std::move(gin);
  }
  return g;
}

} // namespace avsplat

#pragma once

#include "avsplat/common.hpp"

#include <random>
#include <vector>

namespace avsplat {

struct MlpConfig {
  int input_width = 32;
  int hidden_width = 64;
  int hidden_layers = 2;
  int output_width = 1;

  void validate() const;
};

/// Fully connected rectifier network evaluated on batches stored column-wise
/// (features x batch). Parameters are one flat array: for each layer the
/// column-major weight matrix followed by its bias.
class Mlp {
public:
  struct Cache {
    std::vector<Eigen::MatrixXd> activations; // input, then each hidden layer post-rectifier
  };

  Mlp() = default;
  explicit Mlp(const MlpConfig &cfg);

  const MlpConfig &config() const { return cfg_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Hidden layers uniform in +-sqrt(6 / (fan_in + fan_out)); output layer and all biases zero.
  void init(std::mt19937_64 &rng);

  int layer_count() const { return cfg_.hidden_layers + 1; }
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd &input, Cache *cache = nullptr) const;
  /// Accumulates dL/dparams into grad (same layout as params) and returns dL/dinput.
  Eigen::MatrixXd backward(const Cache &cache, const Eigen::MatrixXd &d_output, std::span<double> grad) const;

private:
  int in_width(int layer) const { return layer == 0 ? cfg_.input_width : cfg_.hidden_width; }
  int out_width(int layer) const { return layer == cfg_.hidden_layers ? cfg_.output_width : cfg_.hidden_width; }

  MlpConfig cfg_;
  std::vector<std::size_t> offsets_; // weight offset per layer; bias follows
  std::vector<double> params_;
};

} // namespace avsplat

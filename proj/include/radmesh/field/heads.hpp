#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace radmesh::field {

struct HeadsConfig {
  int hidden = 32;
  int sh_degree = 2;
  /// Initial output bias of the density head, i.e. log of the starting density.
  double init_log_density = 0.0;
  /// Initial output bias of the DC color coefficients.
  double init_color_bias = 0.0;
};

/// Shallow one-hidden-layer ReLU network: in -> hidden -> out. Weights live
/// inside a parent parameter array; the layer stores only offsets.
struct DenseHead {
  int in = 0;
  int hidden = 0;
  int out = 0;
  std::size_t offset = 0;  // W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out)

  std::size_t param_count() const {
    return static_cast<std::size_t>(hidden) * in + hidden + static_cast<std::size_t>(out) * hidden +
           out;
  }
  /// hidden_act receives the post-ReLU activations (size hidden).
  void forward(std::span<const double> params, std::span<const double> x,
               std::span<double> hidden_act, std::span<double> y) const;
  /// Accumulates parameter gradients and input gradients.
  void backward(std::span<const double> params, std::span<const double> x,
                std::span<const double> hidden_act, std::span<const double> grad_y,
                std::span<double> grad_params, std::span<double> grad_x) const;
};

/// The three attribute heads: density (1 output), spherical-harmonic color
/// coefficients (3 * (degree+1)^2 outputs, channel-major) and the color
/// gradient direction (3 outputs).
class Heads {
 public:
  Heads() = default;
  Heads(int input_dim, const HeadsConfig& config, std::uint64_t seed);

  const HeadsConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }
  int sh_degree() const { return config_.sh_degree; }
  int sh_count() const { return (config_.sh_degree + 1) * (config_.sh_degree + 1); }

  const DenseHead& sigma_head() const { return sigma_; }
  const DenseHead& sh_head() const { return sh_; }
  const DenseHead& grad_head() const { return grad_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

 private:
  HeadsConfig config_;
  int input_dim_ = 0;
  DenseHead sigma_, sh_, grad_;
  std::vector<double> params_;
};

}  // namespace radmesh::field

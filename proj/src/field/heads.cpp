#include "radmesh/field/heads.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "radmesh/field/sh.hpp"

namespace radmesh::field {

void DenseHead::forward(std::span<const double> params, std::span<const double> x,
                        std::span<double> hidden_act, std::span<double> y) const {
  const double* w1 = params.data() + offset;
  const double* b1 = w1 + static_cast<std::size_t>(hidden) * in;
  const double* w2 = b1 + hidden;
  const double* b2 = w2 + static_cast<std::size_t>(out) * hidden;
  for (int h = 0; h < hidden; ++h) {
    double a = b1[h];
    const double* row = w1 + static_cast<std::size_t>(h) * in;
    for (int i = 0; i < in; ++i) a += row[i] * x[i];
    hidden_act[h] = a > 0.0 ? a : 0.0;
  }
  for (int o = 0; o < out; ++o) {
    double a = b2[o];
    const double* row = w2 + static_cast<std::size_t>(o) * hidden;
    for (int h = 0; h < hidden; ++h) a += row[h] * hidden_act[h];
    y[o] = a;
  }
}

void DenseHead::backward(std::span<const double> params, std::span<const double> x,
                         std::span<const double> hidden_act, std::span<const double> grad_y,
                         std::span<double> grad_params, std::span<double> grad_x) const {
  const std::size_t w1o = offset;
  const std::size_t b1o = w1o + static_cast<std::size_t>(hidden) * in;
  const std::size_t w2o = b1o + hidden;
  const std::size_t b2o = w2o + static_cast<std::size_t>(out) * hidden;
  double grad_hidden[256];
  for (int h = 0; h < hidden; ++h) grad_hidden[h] = 0.0;
  for (int o = 0; o < out; ++o) {
    const double g = grad_y[o];
    if (g == 0.0) continue;
    grad_params[b2o + o] += g;
    const double* row = params.data() + w2o + static_cast<std::size_t>(o) * hidden;
    double* grow = grad_params.data() + w2o + static_cast<std::size_t>(o) * hidden;
    for (int h = 0; h < hidden; ++h) {
      grow[h] += g * hidden_act[h];
      grad_hidden[h] += g * row[h];
    }
  }
  for (int h = 0; h < hidden; ++h) {
    if (hidden_act[h] <= 0.0) continue;  // ReLU gate
    const double g = grad_hidden[h];
    if (g == 0.0) continue;
    grad_params[b1o + h] += g;
    const double* row = params.data() + w1o + static_cast<std::size_t>(h) * in;
    double* grow = grad_params.data() + w1o + static_cast<std::size_t>(h) * in;
    for (int i = 0; i < in; ++i) {
      grow[i] += g * x[i];
      grad_x[i] += g * row[i];
    }
  }
}

Heads::Heads(int input_dim, const HeadsConfig& config, std::uint64_t seed)
    : config_(config), input_dim_(input_dim) {
  if (config.hidden < 1 || config.hidden > 256) throw std::invalid_argument("hidden width");
  if (config.sh_degree < 0 || config.sh_degree > kMaxShDegree) {
    throw std::invalid_argument("sh degree");
  }
  std::size_t offset = 0;
  auto make = [&](int out) {
    DenseHead h{input_dim, config.hidden, out, offset};
    offset += h.param_count();
    return h;
  };
  sigma_ = make(1);
  sh_ = make(3 * sh_count());
  grad_ = make(3);
  params_.assign(offset, 0.0);

  std::mt19937_64 rng(seed);
  auto init = [&](const DenseHead& h) {
    // He-uniform first layer, Glorot-uniform second, zero biases.
    const double a1 = std::sqrt(6.0 / h.in);
    const double a2 = std::sqrt(6.0 / (h.hidden + h.out));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    double* p = params_.data() + h.offset;
    for (int i = 0; i < h.hidden * h.in; ++i) *p++ = u1(rng);
    for (int i = 0; i < h.hidden; ++i) *p++ = 0.0;
    for (int i = 0; i < h.out * h.hidden; ++i) *p++ = u2(rng);
  };
  init(sigma_);
  init(sh_);
  init(grad_);
  // ReLU units need a positive bias to stay alive while the features start
  // near zero.
  for (const DenseHead* h : {&sigma_, &sh_, &grad_}) {
    double* b1 = params_.data() + h->offset + static_cast<std::size_t>(h->hidden) * h->in;
    for (int i = 0; i < h->hidden; ++i) b1[i] = 0.1;
  }
  auto out_bias = [&](const DenseHead& h) {
    return params_.data() + h.offset + static_cast<std::size_t>(h.hidden) * h.in + h.hidden +
           static_cast<std::size_t>(h.out) * h.hidden;
  };
  out_bias(sigma_)[0] = config.init_log_density;
  for (int c = 0; c < 3; ++c) out_bias(sh_)[c * sh_count()] = config.init_color_bias;
}

}  // namespace radmesh::field

#include "radmesh/optim/adam.hpp"

#include <algorithm>
#include <cmath>

#include "radmesh/error.hpp"

namespace radmesh::optim {

void Adam::resize(std::size_t n) {
  m_.resize(n, 0.0);
  v_.resize(n, 0.0);
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size() || params.size() != m_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Adam state, parameters and gradient differ in size");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = lr / c1;
  const double inv_c2 = 1.0 / c2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + config_.eps);
  }
}

void Adam::restore(std::vector<double> m, std::vector<double> v, std::uint64_t t) {
  if (m.size() != v.size()) throw Error(ErrorCode::Format, "Adam moment sizes differ");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double LRSchedule::base(std::uint64_t i) const {
  if (iterations == 0 || initial <= 0.0 || final <= 0.0) return initial;
  const double u = std::min(1.0, static_cast<double>(i) / static_cast<double>(iterations));
  return std::exp((1.0 - u) * std::log(initial) + u * std::log(final));
}

double LRSchedule::at(std::uint64_t i) const {
  double lr = base(i);
  const double l0 = base(0);
  for (const std::uint64_t s : spikes) {
    if (i > s) lr += (l0 - base(s)) * std::exp(-6.0 * static_cast<double>(i - s) / spike_duration);
  }
  return lr;
}

}  // namespace radmesh::optim

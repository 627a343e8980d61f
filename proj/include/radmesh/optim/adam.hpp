#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace radmesh::optim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
};

/// Adam over a flat parameter vector. The state grows with resize() so
/// parameters appended later (new vertices) start from zero moments.
class Adam {
 public:
  explicit Adam(const AdamConfig& config = {}) : config_(config) {}

  void resize(std::size_t n);
  std::size_t size() const { return m_.size(); }
  std::uint64_t steps() const { return t_; }

  void step(std::span<double> params, std::span<const double> grad, double lr);

  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, std::uint64_t t);

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

/// Log-linear decay from `initial` to `final` over `iterations`, plus a decaying
/// spike after every registered iteration I:
///   lr(i) = l(i) + sum_I [i > I] (l(0) - l(I)) exp(-6 (i - I) / L).
struct LRSchedule {
  double initial = 1e-2;
  double final = 1e-4;
  std::uint64_t iterations = 1;
  double spike_duration = 500.0;
  std::vector<std::uint64_t> spikes;

  double base(std::uint64_t i) const;
  double at(std::uint64_t i) const;
};

}  // namespace radmesh::optim

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "radmesh/densify/densify.hpp"
#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/optim/adam.hpp"
#include "radmesh/optim/losses.hpp"
#include "radmesh/render/renderer.hpp"

namespace radmesh::optim {

/// One posed training image.
struct View {
  render::Camera camera;
  ImageD image;
  std::string name;
};

struct LossWeights {
  double ssim = 0.2;
  double distortion = 0.0;
  double weight_decay = 0.0;
};

struct LrRange {
  double initial = 1e-2;
  double final = 1e-3;
};

struct TrainConfig {
  std::uint64_t iterations = 5000;
  std::uint64_t rebuild_every = 10;
  std::uint64_t densify_every = 500;
  /// Last iteration at which densification may run; 0 means the whole run.
  std::uint64_t densify_until = 0;
  densify::DensifyConfig densify;
  LrRange grid_lr{1e-2, 1e-3};
  LrRange heads_lr{1e-3, 1e-4};
  /// Vertex step sizes as fractions of the scene scale.
  LrRange vertex_lr{1e-3, 1e-5};
  double spike_duration = 250.0;
  LossWeights weights;
  AdamConfig adam;
  bool optimize_vertices = true;
  render::RenderOptions render;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  /// Length unit of the distortion loss and vertex learning rates; 0 means
  /// the bounding diameter of the initial points.
  double scene_scale = 0.0;

  /// Throws Error(Format) for zero cadences or negative weights.
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double photometric = 0.0;
  double distortion = 0.0;
  double weight_decay = 0.0;
  double psnr = 0.0;
};

/// Loss of one view and its gradient with respect to the grid, heads and
/// vertices (accumulated into grad, which must be sized for field and mesh).
/// Pixel work is split into a fixed number of chunks whose partial gradients
/// are summed in chunk order, so results depend on `threads` only through
/// that partition.
LossBreakdown compute_gradients(const field::Field& field, const geometry::TetMesh& mesh,
                                const View& view, const LossWeights& weights,
                                const render::RenderOptions& options, double scene_scale,
                                field::FieldGrad& grad, std::size_t threads = 0,
                                ImageD* rendered = nullptr);

/// Loss of one view without gradients.
LossBreakdown evaluate_loss(const field::Field& field, const geometry::TetMesh& mesh,
                            const View& view, const LossWeights& weights,
                            const render::RenderOptions& options, double scene_scale,
                            std::size_t threads = 0, ImageD* rendered = nullptr);

struct StepStats {
  std::uint64_t iteration = 0;  // iteration count after the step
  std::size_t view = 0;
  LossBreakdown loss;
  std::size_t tets = 0;
  std::size_t points = 0;
  bool rebuilt = false;
  std::size_t splits = 0;
};

/// Optimizer state of the three parameter groups.
struct OptimizerState {
  Adam grid;
  Adam heads;
  Adam vertices;
};

/// Training loop: sample a view, render, backpropagate, Adam update, rebuild
/// the triangulation on cadence and densify on cadence.
class Trainer {
 public:
  Trainer(std::vector<Point3> points, std::vector<View> views, const field::FieldConfig& field_config,
          const TrainConfig& config);

  StepStats step();
  /// Runs until `config().iterations`; the callback sees every step.
  void run(const std::function<void(const StepStats&)>& on_step = {});

  /// Runs one densification pass now and rebuilds; returns the decisions.
  std::vector<densify::SplitDecision> densify_now();

  const TrainConfig& config() const { return config_; }
  const field::Field& field() const { return field_; }
  field::Field& field() { return field_; }
  const geometry::TetMesh& mesh() const { return mesh_; }
  const std::vector<Point3>& points() const { return points_; }
  const std::vector<View>& views() const { return views_; }
  std::uint64_t iteration() const { return iteration_; }
  double scene_scale() const { return scene_scale_; }
  const std::vector<std::uint64_t>& spikes() const { return spikes_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  double grid_lr() const;
  double vertex_lr() const;
  double heads_lr() const;

  /// Restores a saved state (points, iteration, spikes, optimizer, rng).
  void restore(std::vector<Point3> points, std::uint64_t iteration,
               std::vector<std::uint64_t> spikes, OptimizerState optimizer,
               const std::string& rng_state);
  std::string rng_state() const;

  /// Loss and PSNR over all views without updating anything.
  LossBreakdown evaluate_all(std::vector<ImageD>* renders = nullptr) const;

 private:
  void rebuild();
  LRSchedule schedule(const LrRange& range, bool spiked) const;

  TrainConfig config_;
  std::vector<View> views_;
  field::Field field_;
  std::vector<Point3> points_;
  geometry::TetMesh mesh_;
  OptimizerState optimizer_;
  std::vector<std::uint64_t> spikes_;
  std::uint64_t iteration_ = 0;
  double scene_scale_ = 1.0;
  std::mt19937_64 rng_;
  field::FieldGrad grad_;
};

}  // namespace radmesh::optim

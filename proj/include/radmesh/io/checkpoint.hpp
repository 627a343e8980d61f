#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/io/config.hpp"
#include "radmesh/optim/train.hpp"

namespace radmesh::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training state on disk. A checkpoint is a directory holding
///   points.ply      vertex positions (binary PLY, double)
///   field.bin       hash-grid and head parameters
///   optimizer.bin   Adam moments and step counts of the three groups
///   meta.json       format version, iteration, spikes, rng state, config
/// The tetrahedralization is rebuilt from the points on load.
struct Checkpoint {
  RunConfig config;
  std::vector<Point3> points;
  std::vector<double> grid_params;
  std::vector<double> heads_params;
  optim::OptimizerState optimizer;
  std::uint64_t iteration = 0;
  std::vector<std::uint64_t> spikes;
  std::string rng_state;
  double scene_scale = 1.0;

  /// Field with the stored parameters.
  field::Field make_field() const;
};

Checkpoint snapshot(const optim::Trainer& trainer, const RunConfig& config);
void save_checkpoint(const std::string& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& dir);

/// Trainer continuing from a checkpoint with the given views.
optim::Trainer resume_trainer(const Checkpoint& checkpoint, std::vector<optim::View> views);

/// One CSV row per training step. No wall-clock columns, so equal seeds give
/// byte-identical files.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false);
  void write(const optim::StepStats& stats, double grid_lr, double heads_lr, double vertex_lr);

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace radmesh::io

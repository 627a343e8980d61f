#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/render/renderer.hpp"

namespace radmesh::densify {

using field::Rgb;
using field::TetAttributes;
using render::Camera;
using render::ImageD;

struct DensifyConfig {
  double ssim_threshold = 0.5;
  double variance_threshold = 2.0;
  /// Cameras sampled per pass (without replacement).
  std::size_t sample_size = 20;
  /// Minimum barycentric coordinate of an accepted new point.
  double interior_tolerance = 1e-6;
};

/// Accumulators of one tet as seen by one camera. Every pixel whose ray gives
/// the tet a positive compositing weight w = T alpha contributes.
struct CameraTetStats {
  std::uint32_t hits = 0;
  double mass = 0.0;         // sum w
  double error_mass = 0.0;   // sum w s
  Rgb residual;              // sum w delta
  Rgb residual_sq;           // sum w delta^2
  Point3 entry_sum;          // sum w r(t_in)
  Point3 exit_sum;           // sum w r(t_out)

  void add(const CameraTetStats& o);
  double score() const { return hits ? error_mass / hits : 0.0; }
};

/// Per-camera score and mean entry/exit points of one of the best cameras.
struct ViewScore {
  int camera = -1;
  double score = 0.0;
  Point3 mean_in;
  Point3 mean_out;
};

/// Split statistics streamed over cameras: residual moments over all
/// cameras plus the two highest-scoring cameras of every tet.
class SplitStats {
 public:
  explicit SplitStats(std::size_t num_tets = 0);

  std::size_t num_tets() const { return mass_.size(); }
  /// Folds in the per-tet statistics of one camera.
  void add_camera(int camera, std::span<const CameraTetStats> stats);

  /// Mean of the two largest per-camera scores; 0 when fewer than two cameras
  /// saw the tet.
  double ssim_score(std::size_t k) const;
  /// Weighted residual variance summed over channels, times the total mass.
  double variance_score(std::size_t k) const;
  std::uint32_t views(std::size_t k) const { return views_[k]; }
  double mass(std::size_t k) const { return mass_[k]; }
  const std::array<ViewScore, 2>& top_views(std::size_t k) const { return top_[k]; }

 private:
  std::vector<double> mass_;
  std::vector<Rgb> residual_;
  std::vector<Rgb> residual_sq_;
  std::vector<std::uint32_t> views_;
  std::vector<std::array<ViewScore, 2>> top_;
};

/// Per-pixel SSIM error (1 - SSIM) / 2 clamped to [0, 1], averaged over channels.
ImageD ssim_error_map(const ImageD& render, const ImageD& gt);

/// Statistics of one camera: renders, computes the per-pixel error and
/// residual, then walks every pixel's segments. `out` is resized to the tet
/// count and overwritten.
void accumulate_camera(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                       const Camera& camera, const ImageD& gt,
                       const render::RenderOptions& options, std::vector<CameraTetStats>& out);

struct DensifyView {
  const Camera* camera = nullptr;
  const ImageD* image = nullptr;
};

/// Streams the statistics of the given views; attributes are evaluated per
/// camera from the field. Parallel over cameras with per-camera shards merged
/// in view order.
SplitStats accumulate(const field::Field& field, const geometry::TetMesh& mesh,
                      std::span<const DensifyView> views, const render::RenderOptions& options,
                      std::size_t threads = 0);

/// Closest points between segments [a0, a1] and [b0, b1] (degenerate
/// segments are treated as points).
void closest_points(const Point3& a0, const Point3& a1, const Point3& b0, const Point3& b1,
                    Point3& pa, Point3& pb);

/// True when all barycentric coordinates of p in tet v are >= tolerance.
bool strictly_inside(const std::array<Point3, 4>& v, const Point3& p, double tolerance = 1e-6);

/// Uniform point inside the tet from Dirichlet(1,1,1,1) barycentrics, each at
/// least `tolerance`.
Point3 random_interior_point(const std::array<Point3, 4>& v, std::mt19937_64& rng,
                             double tolerance = 1e-6);

enum class Trigger { Ssim, TotalVariance };
enum class Provenance { Intersection, FallbackRandom };

/// Midpoint of the shortest connector between the two segments, or a random
/// interior point when that midpoint is not strictly inside the tet.
Point3 place_point(const std::array<Point3, 2>& seg_a, const std::array<Point3, 2>& seg_b,
                   const std::array<Point3, 4>& tet, std::mt19937_64& rng,
                   Provenance& provenance, double tolerance = 1e-6);

struct SplitDecision {
  std::uint32_t tet = 0;
  Trigger trigger = Trigger::Ssim;
  bool ssim_triggered = false;
  bool variance_triggered = false;
  double ssim_score = 0.0;
  double variance_score = 0.0;
  Point3 point;
  Provenance provenance = Provenance::Intersection;
};

/// Tets with S_k > ssim_threshold or T_k > variance_threshold, in tet order,
/// each with one new point. Tets seen by fewer than two cameras get a random
/// interior point.
std::vector<SplitDecision> select_splits(const SplitStats& stats, const geometry::TetMesh& mesh,
                                         const DensifyConfig& config, std::mt19937_64& rng);

/// Indices of `count` views drawn uniformly without replacement, sorted.
std::vector<std::size_t> sample_views(std::size_t total, std::size_t count, std::mt19937_64& rng);

}  // namespace radmesh::densify

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/render/camera.hpp"
#include "radmesh/render/image.hpp"
#include "radmesh/render/segment.hpp"

namespace radmesh::render {

using field::AttributeGrad;
using field::TetAttributes;

struct RenderOptions {
  Rgb background{0.0, 0.0, 0.0};
  /// Stop compositing once transmittance drops below this; 0 disables.
  double early_out = 1e-4;
  int tile_size = 16;
  std::size_t threads = 0;
};

/// One composited cell crossing along a ray.
struct SegmentRecord {
  std::uint32_t tet = 0;
  double t_in = 0.0;
  double t_out = 0.0;
  std::uint8_t face_in = kNoFace;
  std::uint8_t face_out = kNoFace;
  double sigma = 0.0;
  double depth = 0.0;  // optical depth d
  double alpha = 0.0;
  Rgb c_in;
  Rgb c_out;
  Rgb delta;
  double transmittance = 1.0;  // before this segment
};

struct RayRecord {
  Ray ray;
  bool valid = false;  // false for fisheye pixels outside the field of view
  std::vector<SegmentRecord> segments;
  Rgb color;                  // background included
  double transmittance = 1.0;  // after the last composited segment
};

struct PixelResult {
  Rgb color;
  double transmittance = 1.0;
};

/// Composites the tets of `order` (front to back for ray.origin) along `ray`.
/// Every tet is intersection-tested; this is the reference path without
/// screen-space binning.
PixelResult render_pixel(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                         std::span<const std::uint32_t> order, const Ray& ray,
                         const RenderOptions& options = {});

/// Per-camera rendering state: the visibility order for the camera origin and
/// per-tile candidate lists built from conservative screen bounds of each tet.
/// Immutable after construction and safe to share between threads.
class FrameRenderer {
 public:
  FrameRenderer(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                const Camera& camera, const RenderOptions& options = {});

  const Camera& camera() const { return camera_; }
  const RenderOptions& options() const { return options_; }
  const std::vector<std::uint32_t>& order() const { return order_; }
  const geometry::TetMesh& mesh() const { return mesh_; }
  std::span<const TetAttributes> attributes() const { return attrs_; }

  /// Traces the ray through the center of pixel (x, y).
  void trace_pixel(int x, int y, RayRecord& record) const;
  /// Candidate tets (in visibility order) for pixel (x, y).
  std::span<const std::uint32_t> candidates(int x, int y) const;

  /// Renders the whole image; optionally fills per-pixel final transmittance
  /// (stored in all three channels).
  ImageD render(ImageD* transmittance = nullptr) const;

 private:
  void bin_tets();

  const geometry::TetMesh& mesh_;
  std::span<const TetAttributes> attrs_;
  Camera camera_;
  RenderOptions options_;
  std::vector<std::uint32_t> order_;
  int tiles_x_ = 0;
  int tiles_y_ = 0;
  std::vector<std::uint32_t> tile_offsets_;
  std::vector<std::uint32_t> tile_tets_;
};

/// Traces `ray` through `candidates` (front-to-back) and records every
/// composited segment.
void trace_ray(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
               std::span<const std::uint32_t> candidates, const Ray& ray,
               const RenderOptions& options, RayRecord& record);

/// Convenience: attributes already evaluated, one image in float precision.
ImageBuffer render_image(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                         const Camera& camera, const RenderOptions& options = {});

/// Extra per-segment adjoints from losses defined on the segments themselves
/// (distortion): d loss / d sigma, d t_in, d t_out.
struct SegmentGrad {
  double sigma = 0.0;
  double t_in = 0.0;
  double t_out = 0.0;
};

/// Reverse pass of one recorded ray: adds d loss / d attributes into
/// grad_attrs (indexed by tet) and the face-plane contributions of the
/// entry/exit distances into grad_vertices. `segment_grads` may be empty.
void backward_ray(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                  const RayRecord& record, const Rgb& grad_color, const Rgb& background,
                  std::span<const SegmentGrad> segment_grads, std::span<AttributeGrad> grad_attrs,
                  std::span<Vec3> grad_vertices);

}  // namespace radmesh::render

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radmesh/field/hash_grid.hpp"
#include "radmesh/field/heads.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/vec.hpp"

namespace radmesh::field {

using Rgb = Vec3;

enum class QueryCenter { Centroid, Circumcenter };

struct FieldConfig {
  HashGridConfig grid;
  HeadsConfig heads;
  QueryCenter center = QueryCenter::Centroid;
  double softplus_beta = 10.0;
  /// Upper bound on the circumradius used by the field; 0 means the bounding
  /// diameter of the mesh. The cap is treated as a constant by the gradients.
  double radius_cap = 0.0;
};

/// Hash grid plus heads: everything that maps a tet to its attributes.
class Field {
 public:
  explicit Field(const FieldConfig& config = {}, std::uint64_t seed = 0);

  const FieldConfig& config() const { return config_; }
  HashGrid& grid() { return grid_; }
  const HashGrid& grid() const { return grid_; }
  Heads& heads() { return heads_; }
  const Heads& heads() const { return heads_; }

 private:
  FieldConfig config_;
  HashGrid grid_;
  Heads heads_;
};

struct TetAttributes {
  double sigma = 0.0;
  Rgb base_color;      // c0 evaluated for the current view direction
  Vec3 grad;           // activated monochrome color slope
  Vec3 grad_pre;       // raw h_delta output
  Point3 center;       // query center, also the anchor of the linear color
  double radius = 0.0;  // circumradius, clamped to the scene diameter
  bool radius_clamped = false;
};

/// Color at p: c0 + grad . (p - center), the same offset on every channel.
inline Rgb tet_color_at(const TetAttributes& a, const Point3& p) {
  const double s = dot(a.grad, p - a.center);
  return a.base_color + Rgb{s, s, s};
}

/// Adjoint of a TetAttributes value as seen by the renderer.
struct AttributeGrad {
  double sigma = 0.0;
  Rgb base_color;
  Vec3 grad;
  Vec3 center;

  bool is_zero() const {
    return sigma == 0.0 && base_color == Rgb{} && grad == Vec3{} && center == Vec3{};
  }
};

/// Head outputs to attributes for features b. view_dir is the unit direction
/// from the camera origin to the center.
TetAttributes tet_attributes(const Heads& heads, std::span<const double> b, const Point3& center,
                             double radius, const Vec3& view_dir, double softplus_beta = 10.0);

/// Query center and clamped radius for tet t.
void tet_query_frame(const Field& field, const geometry::TetMesh& mesh, std::size_t t,
                     Point3& center, double& radius, bool& clamped);

/// Attributes of every tet of the mesh as seen from camera origin `eye`.
std::vector<TetAttributes> evaluate_field(const Field& field, const geometry::TetMesh& mesh,
                                          const Point3& eye, std::size_t threads = 0);

/// Gradients of the whole field parameter set: grid features, head weights and
/// vertex positions.
struct FieldGrad {
  std::vector<double> grid;
  std::vector<double> heads;
  std::vector<Vec3> vertices;

  void resize_like(const Field& field, std::size_t num_points);
  void zero();
  FieldGrad& operator+=(const FieldGrad& o);
};

/// Reverse pass of evaluate_field(): attribute adjoints (one per tet) to
/// parameter and vertex gradients, accumulated into out.
void backward_field(const Field& field, const geometry::TetMesh& mesh, const Point3& eye,
                    std::span<const AttributeGrad> grad_attrs, FieldGrad& out,
                    std::size_t threads = 0);

/// Sum over levels of the mean squared feature value.
double weight_decay(const HashGrid& grid);
/// Adds lambda * d weight_decay / d features into grad.
void weight_decay_backward(const HashGrid& grid, double lambda, std::span<double> grad);

}  // namespace radmesh::field
